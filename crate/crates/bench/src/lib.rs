//! Fixtures shared by the benchmarks.

use bsdisp::measure::make_shell_measure;
use bsdisp::DiscreteMeasure;

pub fn shell(g: f64, n: usize) -> DiscreteMeasure {
    make_shell_measure(1.0, g, n).expect("valid shell")
}
