use diffinc::core::factorize::factorize;
use diffinc::core::field::{synth_half_vortex, synth_vortex, Grid};
use diffinc::curvefile::{CurveFile, DomainSpec};
use diffinc::dump::FieldDump;

fn sample_dump() -> FieldDump {
    let file = CurveFile::gamma_k(2);
    let built = file.build().unwrap();
    let f = factorize(&built.unit_speed, 256).unwrap();
    let g = Grid::new([-1.0, 1.5, -0.75, 1.0], 37, 29, 0.2).unwrap();
    FieldDump {
        field: synth_vortex(&g, &f, [0.13, -0.21], -1).unwrap(),
        curve_hash: file.hash(),
    }
}

#[test]
fn curve_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        CurveFile::gamma_k(3),
        CurveFile::burgers(1.0, 0.8),
        serde_json::from_str::<CurveFile>(r#"{"family":"trig_poly","params":{"tangent":[[1,0.5,0.0],[2,0.05,0.03]],"twist":1}}"#).unwrap(),
        serde_json::from_str::<CurveFile>(
            r#"{"family":"line","params":{"origin":[0,0,0,0],"direction":[1,0,0,0]},"domain":{"kind":"arc","a":0.0,"b":1.0}}"#,
        )
        .unwrap(),
    ];
    for (i, c) in files.iter().enumerate() {
        let p = dir.path().join(format!("c{i}.json"));
        c.write(&p).unwrap();
        let back = CurveFile::read(&p).unwrap();
        assert_eq!(&back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        c.build().unwrap();
    }
    assert_eq!(files[3].domain, Some(DomainSpec::Arc { a: 0.0, b: 1.0 }));
    assert_ne!(files[0].hash(), CurveFile::gamma_k(2).hash());
}

#[test]
fn slow_curves_are_reparametrized() {
    let b = CurveFile::burgers(0.0, 1.0).build().unwrap();
    assert!(b.reparametrized && b.unit_speed.is_unit_speed() && !b.native.is_unit_speed());
    let g = CurveFile::gamma_k(1).build().unwrap();
    assert!(!g.reparametrized && g.homothety == 1.0);
}

#[test]
fn unknown_fields_are_rejected() {
    assert!(
        serde_json::from_str::<CurveFile>(r#"{"family":"gamma_k","params":{"k":1,"kk":2}}"#)
            .is_err()
    );
    assert!(serde_json::from_str::<CurveFile>(r#"{"family":"spiral"}"#).is_err());
}

#[test]
fn field_dumps_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = sample_dump();
    assert!(d.field.masked_count() > 0);
    for name in ["f.csv", "f.bin"] {
        let p = dir.path().join(name);
        d.write(&p).unwrap();
        let back = FieldDump::read(&p).unwrap();
        assert_eq!(back.curve_hash, d.curve_hash);
        assert_eq!(back.field.grid, d.field.grid);
        assert_eq!(back.field.domain, d.field.domain);
        assert_eq!(back.field.mask, d.field.mask);
        assert!(back
            .field
            .theta
            .iter()
            .zip(&d.field.theta)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn dumps_keep_half_vortex_fields() {
    let file = CurveFile::gamma_k(1);
    let f = factorize(&file.build().unwrap().unit_speed, 256).unwrap();
    let g = Grid::square(1.0, 32, 0.25).unwrap();
    let d = FieldDump {
        field: synth_half_vortex(&g, &f, [0.0, 0.0]).unwrap(),
        curve_hash: file.hash(),
    };
    let back = FieldDump::from_binary(&d.to_binary().unwrap()).unwrap();
    assert_eq!(back.field.theta, d.field.theta);
}

#[test]
fn corrupt_dumps_are_rejected() {
    let d = sample_dump();
    let bin = d.to_binary().unwrap();
    assert!(FieldDump::from_binary(&bin[..bin.len() - 1]).is_err());
    let mut bad = bin.clone();
    bad[0] = b'X';
    assert!(FieldDump::from_binary(&bad).is_err());
    let mut long = bin;
    long.push(0);
    assert!(FieldDump::from_binary(&long).is_err());
    let csv = d.to_csv().unwrap();
    let truncated: String = csv.lines().take(40).collect::<Vec<_>>().join("\n");
    assert!(FieldDump::from_csv(&truncated).is_err());
}
