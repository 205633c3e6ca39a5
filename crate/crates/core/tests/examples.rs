//! Every example runs to completion.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));

            #[test]
            fn runs() {
                main();
            }
        }
    };
}

example!(score_records);
example!(normalize_record);
example!(synth_corpus);
example!(build_dataset);
example!(parse_with_mock);
example!(evaluate_mock);
example!(compare_published);
example!(offline_embedding);
example!(http_endpoint);
