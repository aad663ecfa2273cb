use cabpl::crc::{degree_distribution, derive_h, reduce_density, CrcPoly, CrcSpec, Trellis};
use cabpl::gf2::Gf2Matrix;

/// Edge-perspective degree distributions of the reduced CRC-6 parity-check
/// matrix for the N = 128, 64-bit payload system.
#[test]
fn crc6_degree_distribution_for_70_bits() {
    let spec = CrcSpec::new(CrcPoly::nr_crc6(), 70).unwrap();
    let dd = degree_distribution(&reduce_density(&derive_h(&spec))).unwrap();
    let round = |v: &[f64]| v.iter().map(|c| (c * 100.0).round() / 100.0).collect::<Vec<_>>();
    assert_eq!(round(&dd.lambda), vec![0.06, 0.16, 0.3, 0.3, 0.15, 0.03]);
    let rho = round(&dd.rho);
    assert_eq!(rho.len(), 34);
    assert_eq!((rho[32], rho[33]), (0.66, 0.34));
    assert!(rho[..32].iter().all(|&c| c == 0.0));
}

#[test]
fn crc2_toy_matrix_and_trellis() {
    let spec = CrcSpec::new(CrcPoly::crc2(), 5).unwrap();
    let h = reduce_density(&derive_h(&spec));
    let reference = Gf2Matrix::from_rows(&[[1, 0, 1, 1, 0], [0, 1, 1, 0, 1]]).unwrap();
    assert!(h.matrix().same_row_space(&reference));
    let t = Trellis::build(&spec).unwrap();
    assert_eq!(t.num_states(), 4);
    // 2^3 codewords of the (5, 3) code
    assert_eq!(t.count_terminated_paths(), 8);
}
