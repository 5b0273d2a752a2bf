mod common;

use common::*;
use maxplus::io::*;
use maxplus::maxplus_core::model::CnnShape;
use maxplus::maxplus_core::pruning::prune_block;
use maxplus::maxplus_core::{Arch, ImageDims, Model, SeededRng, Tensor};

fn config() -> Vec<(String, String)> {
    vec![("seed".into(), "7".into()), ("dropout".into(), "0.5".into())]
}

fn tiny_cnn() -> CnnShape {
    CnnShape { conv1: 2, conv2: 3, kernel: 3, hidden: 5, units: 4 }
}

#[test]
fn idx_pair_parses_exactly() {
    let images = idx_images(3, 2, 2, |i, p| (i * 4 + p) as u8 * 20);
    let ds = parse_idx(&images, &idx_labels(&[4, 0, 9])).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.labels(), &[4, 0, 9]);
    assert_eq!(ds.dims(), ImageDims { channels: 1, height: 2, width: 2 });
    assert_eq!(ds.images().row(1), &[80.0 / 255.0, 100.0 / 255.0, 120.0 / 255.0, 140.0 / 255.0]);
}

#[test]
fn corrupted_idx_files_give_typed_errors() {
    let good = idx_images(2, 2, 2, |_, _| 1);
    let labels = idx_labels(&[1, 2]);

    let mut bad_magic = good.clone();
    bad_magic[3] = 0x02;
    assert!(matches!(parse_idx(&bad_magic, &labels), Err(IoError::Format(_))));
    assert!(matches!(parse_idx(&good, &good), Err(IoError::Format(_))));
    assert!(matches!(parse_idx(&good[..10], &labels), Err(IoError::Length(_))));
    assert!(matches!(parse_idx(&good[..good.len() - 1], &labels), Err(IoError::Length(_))));
    let mut long = good.clone();
    long.push(0);
    assert!(matches!(parse_idx(&long, &labels), Err(IoError::Length(_))));
    assert!(matches!(parse_idx(&good, &idx_labels(&[1])), Err(IoError::Consistency(_))));
    assert!(matches!(parse_idx(&good, &idx_labels(&[1, 10])), Err(IoError::Format(_))));
    assert!(matches!(parse_idx(&[], &labels), Err(IoError::Length(_))));
}

#[test]
fn cifar_records_parse_exactly() {
    let mut bytes = cifar_record(3, 255);
    bytes.extend(cifar_record(9, 0));
    let ds = parse_cifar10(&bytes).unwrap();
    assert_eq!(ds.labels(), &[3, 9]);
    assert_eq!(ds.dims(), ImageDims::CIFAR10);
    assert!(ds.images().row(0).iter().all(|&v| v == 1.0));
    assert!(ds.images().row(1).iter().all(|&v| v == 0.0));
}

#[test]
fn corrupted_cifar_gives_typed_errors() {
    let rec = cifar_record(1, 5);
    assert!(matches!(parse_cifar10(&rec[..CIFAR_RECORD - 1]), Err(IoError::Length(_))));
    assert!(matches!(parse_cifar10(&cifar_record(10, 0)), Err(IoError::Format(_))));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.bin");
    assert!(matches!(load_cifar10(&[missing.as_path()]), Err(IoError::File { .. })));
}

fn roundtrip(model: &Model) {
    let bytes = encode_model(model, &config()).unwrap();
    let file = decode_model(&bytes).unwrap();
    assert_eq!(&file.model, model);
    assert_eq!(file.config, config());
    let a: Vec<u64> = model.to_parts().tensors.iter().flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits())).collect();
    let b: Vec<u64> =
        file.model.to_parts().tensors.iter().flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits())).collect();
    assert_eq!(a, b);
}

#[test]
fn every_architecture_round_trips_bitwise() {
    let dims = ImageDims { channels: 1, height: 8, width: 8 };
    for arch in [Arch::MaxPlusMlp, Arch::SoftmaxLinear, Arch::MaxoutLinear { group: 3 }, Arch::CnnMaxPlus, Arch::CnnPlain] {
        let mut rng = SeededRng::new(11);
        roundtrip(&Model::init(arch, dims, 6, &tiny_cnn(), 0.05, &mut rng).unwrap());
    }
}

#[test]
fn negative_infinity_weights_round_trip() {
    let mut rng = SeededRng::new(2);
    let dims = ImageDims { channels: 1, height: 4, width: 4 };
    let mut model = Model::init(Arch::MaxPlusMlp, dims, 5, &tiny_cnn(), 0.05, &mut rng).unwrap();
    let block = model.maxplus_block_mut().unwrap();
    block.set_wm(0, 3, f64::NEG_INFINITY).unwrap();
    block.set_wm(4, 9, f64::NEG_INFINITY).unwrap();
    roundtrip(&model);
    let (head, _) = prune_block(model.maxplus_block().unwrap(), 0.4).unwrap();
    roundtrip(&Model::Pruned { trunk: None, head });
}

#[test]
fn model_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mxpl");
    let mut rng = SeededRng::new(5);
    let model = Model::init(Arch::MaxPlusMlp, ImageDims { channels: 1, height: 3, width: 3 }, 4, &tiny_cnn(), 0.05, &mut rng)
        .unwrap();
    save_model(&model, &config(), &path).unwrap();
    assert_eq!(load_model(&path).unwrap().model, model);
}

#[test]
fn damaged_model_files_are_rejected() {
    let mut rng = SeededRng::new(5);
    let model = Model::init(Arch::MaxPlusMlp, ImageDims { channels: 1, height: 3, width: 3 }, 4, &tiny_cnn(), 0.05, &mut rng)
        .unwrap();
    let bytes = encode_model(&model, &config()).unwrap();
    assert!(matches!(decode_model(&bytes[..bytes.len() - 8]), Err(IoError::Consistency(_))));
    assert!(matches!(decode_model(b"MXPL0\nend\n"), Err(IoError::Format(_))));
    assert!(matches!(decode_model(b"MXPL1\narch=maxplus-mlp\n"), Err(IoError::Format(_))));

    let text = String::from_utf8_lossy(&bytes).into_owned();
    let header_len = text.find("end\n").unwrap() + 4;
    let mut nan = bytes.clone();
    nan[header_len..header_len + 8].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(matches!(decode_model(&nan), Err(IoError::Format(_))));

    let swapped = String::from_utf8(bytes[..header_len].to_vec()).unwrap().replace("tensor wm 4,10", "tensor wm 10,4");
    let mut b = swapped.into_bytes();
    b.extend(&bytes[header_len..]);
    assert!(decode_model(&b).is_err());
}

#[test]
fn pgm_reads_back_with_expected_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.pgm");
    let img = Tensor::from_rows(&[[0.0, 1.0, 2.0], [f64::NEG_INFINITY, 4.0, 2.0]]).unwrap();
    export_pgm(&img, &path).unwrap();
    let back = image::open(&path).unwrap().to_luma8();
    assert_eq!(back.dimensions(), (3, 2));
    assert_eq!(back.into_raw(), vec![0, 64, 128, 0, 255, 128]);
    let flat = pgm_bytes(&Tensor::filled(&[2, 2], 3.0).unwrap()).unwrap();
    assert!(flat.ends_with(&[128; 4]));
}

#[test]
fn pgm_ignores_affine_rescaling() {
    let mut rng = SeededRng::new(12);
    let img = maxplus::maxplus_core::tensor::seeded_uniform(&mut rng, &[9, 7], -1.0, 1.0).unwrap();
    let base = pgm_bytes(&img).unwrap();
    for (a, b) in [(2.0, 3.0), (0.25, -1.0), (8.0, 0.0)] {
        let scaled = Tensor::new(vec![9, 7], img.data().iter().map(|v| a * v + b).collect()).unwrap();
        assert_eq!(pgm_bytes(&scaled).unwrap(), base);
    }
}

#[test]
fn wm_columns_become_square_images() {
    let (img, padded) = wm_column_image(&vec![0.5; 144]).unwrap();
    assert_eq!((img.shape(), padded), (&[12, 12][..], false));
    let (img, padded) = wm_column_image(&[1.0, 2.0, 3.0, -1.0, 0.0]).unwrap();
    assert_eq!((img.shape(), padded), (&[3, 3][..], true));
    assert_eq!(img.data()[8], -1.0);
}

#[test]
fn csv_tables_round_trip() {
    let mut t = Table::new(&["name", "count", "value"]);
    t.push(vec!["a, b".into(), 3usize.into(), 0.1234567891.into()]);
    t.push(vec!["c".into(), 0usize.into(), 1e-9.into()]);
    let text = t.to_csv().unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<Vec<String>> = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    assert_eq!(rows[0], ["a, b", "3", "0.123457"]);
    assert_eq!(rows[1], ["c", "0", "1e-09"]);
    let mut ragged = Table::new(&["x"]);
    ragged.push(vec![1usize.into(), 2usize.into()]);
    assert!(ragged.to_csv().is_err());
}

#[test]
fn sig6_formatting() {
    assert_eq!(format_sig6(0.5), "0.5");
    assert_eq!(format_sig6(123456789.0), "1.23457e+08");
    assert_eq!(format_sig6(-0.000123456789), "-0.000123457");
    assert_eq!(format_sig6(f64::NEG_INFINITY), "-inf");
}
