//! Print the layout and circuit of a small injection program.
use msinject::protocol::{build_stage1, build_stage2, PatternChoice, SchemeVariant};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let (dx2, dz2, dm) = match args[..] {
        [a, b, c] => (a, b, c),
        _ => (3, 5, 1),
    };
    let s1 = build_stage1(SchemeVariant::TwoQubitZz, 1, 3, std::f64::consts::FRAC_PI_8).expect("stage I");
    let p = build_stage2(&s1, dx2, dz2, dm, PatternChoice::Default).expect("stage II");
    print!("{}", p.layout.dump());
    print!("{}", p.dump());
}
