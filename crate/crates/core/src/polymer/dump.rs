//! Line-oriented text dumps of polymer lists, used for golden files.
//!
//! One polymer per line: the support size followed by the canonical cell texts of
//! its positive support, space separated.

use crate::lattice::Lattice;
use crate::polymer::{PathPolymer, VortexPolymer};

pub fn dump_paths(lat: &Lattice, paths: &[PathPolymer]) -> String {
    let mut lines: Vec<String> = paths
        .iter()
        .map(|p| {
            let cells: Vec<String> = p.edges().iter().map(|&e| lat.cell(1, e as usize).to_text()).collect();
            format!("{} {}", p.len(), cells.join(" "))
        })
        .collect();
    lines.sort();
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

pub fn dump_vortices(lat: &Lattice, vortices: &[VortexPolymer]) -> String {
    let mut lines: Vec<String> = vortices
        .iter()
        .map(|w| {
            let cells: Vec<String> = w.plaquettes().iter().map(|&p| lat.cell(2, p as usize).to_text()).collect();
            format!("{} {}", w.support_size(), cells.join(" "))
        })
        .collect();
    lines.sort();
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoxSpec;

    #[test]
    fn dump_is_sorted_and_canonical() {
        let lat = Lattice::new(&BoxSpec::new(vec![(0, 1), (0, 1)]).unwrap());
        let sq = PathPolymer::from_edges(&lat, 0..4).unwrap();
        let text = dump_paths(&lat, &[sq]);
        assert_eq!(text, "4 1:(0,0):0:+ 1:(0,0):1:+ 1:(0,1):0:+ 1:(1,0):1:+\n");
    }
}
