// Render a comparison of published fine-tuned and base scores and the
// relative improvement of each fine-tuned model over its base.
//
//     cargo run --example compare_published

use resumetune::evaluator::{compare, improvements, read_rows_csv};

fn main() {
    let rows = read_rows_csv(include_str!("../fixtures/published_rows.csv")).unwrap();
    let table = compare(&rows).unwrap();
    print!("{}", table.render_text());
    println!();
    for imp in improvements(&rows) {
        println!("{}", imp.render());
    }
}
