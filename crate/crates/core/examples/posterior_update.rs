//! One axis of the search by hand: bisect, ask, update, repeat.

use pbaloc::belief::Belief;

fn show(label: &str, b: &Belief) {
    let s = b.summarize();
    let mass: Vec<String> = b.mass().iter().map(|p| format!("{p:.3}")).collect();
    println!("{label:<22} [{}] median {} map {} ({:.3})", mass.join(" "), s.median_bin, s.map_bin, s.map_mass);
}

fn main() -> pbaloc::Result<()> {
    let mut b = Belief::uniform(8)?;
    show("uniform", &b);

    // Target sits in bin 6; the oracle is right except for the third answer.
    let target = 6;
    let eps = 0.2;
    for (t, lie) in [false, false, true, false, false, false].into_iter().enumerate() {
        let x = b.bisection_point();
        let truth = target <= x;
        b = b.update(1, x, truth != lie, eps)?;
        show(&format!("t={} split {x} y={}", t + 1, (truth != lie) as u8), &b);
    }
    Ok(())
}
