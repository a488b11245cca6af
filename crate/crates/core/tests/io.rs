use coggen::forward::{gen_vd_mask, MaskPattern, SamplingMask};
use coggen::generator::{init_inr, InrConfig};
use coggen::io::{
    decode_grid, decode_mask, encode_grid, encode_mask, format_curve_csv, parse_curve_csv, read_curve_csv,
    read_grid, read_mask, read_params, write_curve_csv, write_grid, write_mask, write_params, write_pgm,
};
use coggen::optimizer::CurvePoint;
use coggen::{Complex64, ComplexGrid, Error};
use proptest::prelude::*;

#[test]
fn grid_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let g = ComplexGrid::from_fn(16, 16, |r, c| {
        Complex64::new((r as f64 * 0.37).sin() / 3.0, -(c as f64).sqrt() * 1e-300)
    });
    let path = dir.path().join("g.cgim");
    write_grid(&path, &g).unwrap();
    let back = read_grid(&path).unwrap();
    for (a, b) in g.data().iter().zip(back.data()) {
        assert_eq!((a.re.to_bits(), a.im.to_bits()), (b.re.to_bits(), b.im.to_bits()));
    }
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 17 + 256 * 16);
}

#[test]
fn mask_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cgim");
    let small = SamplingMask::full(4, 4);
    write_mask(&path, &small).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 33);

    let vd = gen_vd_mask(32, 32, MaskPattern::Vd1dPe, 4.0, 0.1, 5).unwrap();
    write_mask(&path, &vd).unwrap();
    let back = read_mask(&path).unwrap();
    assert_eq!(back.selected, vd.selected);
    assert_eq!(back.pattern, MaskPattern::Vd1dPe);
}

#[test]
fn corrupt_files_are_rejected() {
    let bytes = encode_mask(&SamplingMask::full(4, 4));
    let mut wrong = bytes.clone();
    wrong[..4].copy_from_slice(b"NOPE");
    assert!(matches!(decode_mask(&wrong), Err(Error::BadMagic)));
    assert!(matches!(decode_mask(&bytes[..20]), Err(Error::TruncatedFile)));
    let mut bad_byte = bytes.clone();
    bad_byte[20] = 7;
    assert!(decode_mask(&bad_byte).is_err());
    assert!(matches!(decode_grid(&bytes), Err(Error::BadDtype(1))));
    assert!(matches!(read_grid("/nonexistent/x.cgim"), Err(Error::Io(_))));
}

fn point(i: usize, loss: f64, rlne: Option<f64>) -> CurvePoint {
    CurvePoint {
        iteration: i,
        stage: 1 + i / 10,
        loss,
        rlne_roi: rlne,
        psnr_db: rlne.map(|r| -20.0 * r.log10()),
    }
}

#[test]
fn curve_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    write_curve_csv(&path, &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "iteration,stage,loss,rlne_roi,psnr_db\n");
    let curve = vec![point(0, 1.0, Some(0.9)), point(10, 0.123456789123, None), point(20, 1e-17, Some(0.05))];
    write_curve_csv(&path, &curve).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    let back = read_curve_csv(&path).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in curve.iter().zip(&back) {
        assert_eq!((a.iteration, a.stage), (b.iteration, b.stage));
        assert!((a.loss - b.loss).abs() <= 1e-9 * a.loss.abs());
        assert_eq!(a.rlne_roi.is_some(), b.rlne_roi.is_some());
    }
    assert!(parse_curve_csv("iteration,stage\n").is_err());
}

#[test]
fn params_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let params = init_inr(&InrConfig { hidden_layers: 2, hidden_width: 8, fourier_features: 4, ..Default::default() }, 3).unwrap();
    write_params(&path, &params).unwrap();
    assert_eq!(read_params(&path).unwrap(), params);
}

#[test]
fn pgm_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.pgm");
    let g = ComplexGrid::from_fn(3, 5, |r, c| Complex64::new((r * c) as f64, 0.0));
    write_pgm(&path, &g).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n5 3\n255\n"));
    assert_eq!(bytes.len(), 11 + 15);
    assert_eq!(*bytes.last().unwrap(), 255);
}

proptest! {
    #[test]
    fn grid_bytes_round_trip(h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let g = ComplexGrid::from_fn(h, w, |r, c| {
            let k = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((r * w + c) as u64);
            Complex64::new(f64::from_bits(k >> 12 | 0x3FF0_0000_0000_0000) - 1.5, (k % 1000) as f64)
        });
        prop_assert_eq!(decode_grid(&encode_grid(&g)).unwrap(), g);
    }

    #[test]
    fn curve_text_round_trips(losses in prop::collection::vec(1e-12f64..1e6, 0..20)) {
        let curve: Vec<CurvePoint> = losses.iter().enumerate().map(|(i, &l)| point(i, l, Some(l / 2.0))).collect();
        let back = parse_curve_csv(&format_curve_csv(&curve)).unwrap();
        prop_assert_eq!(back.len(), curve.len());
        for (a, b) in curve.iter().zip(&back) {
            prop_assert!((a.loss - b.loss).abs() <= 1e-9 * a.loss);
            prop_assert!((a.psnr_db.unwrap() - b.psnr_db.unwrap()).abs() <= 1e-9 * a.psnr_db.unwrap().abs().max(1.0));
        }
    }
}
