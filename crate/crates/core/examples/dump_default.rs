fn main() {
    println!(
        "{}",
        tlr_esc::scenario::Scenario::default_three_day().to_json()
    );
}
