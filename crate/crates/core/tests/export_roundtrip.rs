use anosov_core::conjugacy::compute_conjugacy;
use anosov_core::equilibrium::ensemble;
use anosov_core::export::{ensemble_csv, read_conjugacy_grid, write_conjugacy_grid};
use anosov_core::map::AnosovMap;
use anosov_core::potential::Potential;

#[test]
fn conjugacy_grid_round_trips() {
    let c = compute_conjugacy(&AnosovMap::standard(0.05), 256, 1e-10, 200).unwrap();
    let mut buf = Vec::new();
    write_conjugacy_grid(&mut buf, &c).unwrap();
    assert_eq!(buf.len(), 16 + 2 * 8 * 256 * 256);
    let g = read_conjugacy_grid(buf.as_slice()).unwrap();
    assert_eq!(g.grid_n, 256);
    assert_eq!(g.residual.to_bits(), c.residual.to_bits());
    assert_eq!(g.u_plus, c.u_plus);
    assert_eq!(g.u_minus, c.u_minus);
}

#[test]
fn ensemble_csv_parses_back() {
    let e = ensemble(&AnosovMap::linear_cat(), &Potential::Zero, 4, None).unwrap();
    let mut buf = Vec::new();
    ensemble_csv(&mut buf, &e).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,weight"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), e.len());
    for (row, (p, w)) in rows.iter().zip(e.points.iter().zip(&e.weights)) {
        assert_eq!(row, &vec![p.x1(), p.x2(), *w]);
    }
}
