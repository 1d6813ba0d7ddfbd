use std::fs;

use proptest::prelude::*;
use wavemat::dataset_io::{format_csv, meta_path, read_dataset, write_dataset};
use wavemat::Error;
use wavemat_core::simgen::{default_material_bank, generate_dataset, ProtocolSpec, SensorModel};
use wavemat_core::{CaptureMeta, ClassId, Dataset, LabeledSample, MaterialClass, Waveform, WAVEFORM_LEN};

fn classes() -> Vec<MaterialClass> {
    vec![MaterialClass::new(0, "aluminum"), MaterialClass::new(1, "Vinyl Laminate")]
}

fn sample(label: u16, yaw: f64, rep: u8, values: Vec<f64>) -> LabeledSample {
    LabeledSample {
        waveform: Waveform::new(values).unwrap(),
        meta: CaptureMeta::new(yaw, 1.0, rep).unwrap(),
        label: ClassId(label),
    }
}

fn protocol_data() -> Dataset {
    let bank = default_material_bank();
    let spec = ProtocolSpec {
        materials: bank[..4].to_vec(),
        angles_deg: vec![-15.0, 0.0, 45.0],
        distance_m: 1.0,
        repetitions: 5,
        seed: 77,
    };
    generate_dataset(&spec, &SensorModel::default()).unwrap()
}

#[test]
fn empty_dataset_is_header_only() {
    let d = Dataset::new(vec![], classes(), 3).unwrap();
    let text = format_csv(&d);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("sample_id,label_id,label_name,yaw_deg,distance_m,repetition,power_mode,s000,s001,"));
    assert!(text.ends_with(",s255\n"));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    write_dataset(&d, &p).unwrap();
    assert_eq!(read_dataset(&p, true).unwrap(), d);
}

#[test]
fn zero_waveform_row() {
    let d = Dataset::new(vec![sample(0, 0.0, 1, vec![0.0; WAVEFORM_LEN])], classes(), 3).unwrap();
    let text = format_csv(&d);
    let row = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[..7], ["0", "0", "aluminum", "0", "1", "1", "LOW"]);
    assert_eq!(fields.len(), 7 + 256);
    assert!(fields[7..].iter().all(|f| *f == "0"));
    assert!(!text.contains('\r'));
}

#[test]
fn protocol_dataset_round_trips_with_sidecar() {
    let d = protocol_data();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/data.csv");
    write_dataset(&d, &p).unwrap();
    let meta = fs::read_to_string(meta_path(&p)).unwrap();
    assert_eq!(
        meta,
        "seed=77\nclass.0=aluminum\nclass.1=wood\nclass.2=black_cardboard\nclass.3=black_cloth\n"
    );
    let back = read_dataset(&p, true).unwrap();
    assert_eq!(back, d);
    // bit-exact amplitudes
    for (a, b) in back.samples().iter().zip(d.samples()) {
        for (x, y) in a.waveform.samples().iter().zip(b.waveform.samples()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

fn write_raw(text: &str, meta: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fs::write(&p, text).unwrap();
    fs::write(meta_path(&p), meta).unwrap();
    (dir, p)
}

fn line_of(e: Error) -> usize {
    match e {
        Error::Format { line, .. } => line,
        other => panic!("{other:?}"),
    }
}

#[test]
fn short_row_names_its_line() {
    let d = Dataset::new(
        vec![sample(0, 0.0, 1, vec![0.5; 256]), sample(1, 0.0, 2, vec![0.25; 256])],
        classes(),
        1,
    )
    .unwrap();
    let text = format_csv(&d);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cut = lines[2].rfind(',').unwrap();
    lines[2].truncate(cut);
    let (_g, p) = write_raw(&(lines.join("\n") + "\n"), "seed=1\nclass.0=aluminum\nclass.1=Vinyl Laminate\n");
    let e = read_dataset(&p, false).unwrap_err();
    assert!(e.to_string().contains("expected 263 columns, found 262"), "{e}");
    assert_eq!(line_of(e), 3);
}

#[test]
fn bad_label_and_value_and_yaw_are_rejected() {
    let d = Dataset::new(vec![sample(1, 15.0, 1, vec![0.5; 256])], classes(), 1).unwrap();
    let good = format_csv(&d);
    let meta = "seed=1\nclass.0=aluminum\nclass.1=Vinyl Laminate\n";

    let (_g, p) = write_raw(&good, "seed=1\nclass.0=aluminum\n");
    assert!(read_dataset(&p, false).unwrap_err().to_string().contains("outside the class table"));

    let (_g, p) = write_raw(&good.replacen(",0.5", ",abc", 1), meta);
    let e = read_dataset(&p, false).unwrap_err();
    assert!(e.to_string().contains("s000"), "{e}");
    assert_eq!(line_of(e), 2);

    let (_g, p) = write_raw(&good.replacen(",0.5", ",-0.5", 1), meta);
    assert!(read_dataset(&p, false).is_err());

    let off_grid = good.replacen("Vinyl Laminate,15,", "Vinyl Laminate,10,", 1);
    let (_g, p) = write_raw(&off_grid, meta);
    assert_eq!(read_dataset(&p, false).unwrap().samples()[0].meta.yaw_deg, 10.0);
    assert!(read_dataset(&p, true).unwrap_err().to_string().contains("protocol grid"));

    let (_g, p) = write_raw(&good.replace("Vinyl Laminate,", "Glass,"), meta);
    assert!(read_dataset(&p, false).is_err());
}

#[test]
fn missing_sidecar_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    fs::write(&p, "sample_id\n").unwrap();
    assert!(matches!(read_dataset(&p, false), Err(Error::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_datasets_round_trip(
        rows in prop::collection::vec(
            (0u16..2, -89.0f64..89.0, 0.01f64..50.0, 1u8..=9, prop::collection::vec(0.0f64..1e6, 256)),
            0..6,
        ),
        seed in any::<u64>(),
    ) {
        let samples = rows
            .into_iter()
            .map(|(l, yaw, dist, rep, w)| LabeledSample {
                waveform: Waveform::new(w).unwrap(),
                meta: CaptureMeta::new(yaw, dist, rep).unwrap(),
                label: ClassId(l),
            })
            .collect();
        let d = Dataset::new(samples, classes(), seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_dataset(&d, &p).unwrap();
        prop_assert_eq!(read_dataset(&p, false).unwrap(), d);
    }
}
