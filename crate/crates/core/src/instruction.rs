//! Versioned prompt strings. Changing any of these changes exported
//! datasets, so bump [`INSTRUCTION_VERSION`] with them.

pub const INSTRUCTION_VERSION: &str = "resume-parse-v1";

pub const PARSING_INSTRUCTION: &str = "Extract the candidate's information from the resume text \
and return one JSON object with exactly these keys: name, email, phone, skills, experience, \
education, department. Use \"\" for unknown strings and [] for unknown lists. Each experience \
item has title, company, start_date, end_date, description. Each education item has degree, \
institution, end_date. Write dates as YYYY-MM, YYYY or \"present\". Return only the JSON object.";

/// `{department}` is substituted before sending.
pub const SYNTH_PROMPT_TEMPLATE: &str = "Write a realistic resume for a professional working in \
{department}. Return it as one JSON object with exactly these keys: name, email, phone, skills, \
experience, education, department. Set department to \"{department}\". Each experience item has \
title, company, start_date, end_date, description. Each education item has degree, institution, \
end_date. Write dates as YYYY-MM, YYYY or \"present\". Return only the JSON object.";
