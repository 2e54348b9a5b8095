//! Hand-emitted drilling program and its stream split.

use neurocnc::geometry::Point3;
use neurocnc::nc::{emit_program, merge_streams, parse_program, split_program, Address, DEFAULT_HEADER};
use neurocnc::part_model::{Tool, ToolKind};
use neurocnc::planner::{CuttingParams, Operation, PathBuilder, Sense};
use neurocnc::recognition::OperationClass;

fn drill_op() -> Operation {
    let mut b = PathBuilder::new();
    b.rapid(Point3::new(50.0, 25.0, 22.0))
        .linear(Point3::new(50.0, 25.0, -10.0), 318.0)
        .rapid(Point3::new(50.0, 25.0, 22.0));
    Operation {
        class: OperationClass::DrillNormal,
        feature_id: "H1".into(),
        tool: Tool {
            id: 1,
            kind: ToolKind::Drill,
            diameter: 10.0,
            flutes: 2,
            max_depth: 60.0,
            pitch: None,
        },
        params: CuttingParams {
            spindle_rpm: 3183.0,
            feed: 318.0,
            depth_of_cut: 32.0,
            direction: Sense::Cw,
            coolant: false,
        },
        toolpath: b.finish(),
        clearance_z: 22.0,
    }
}

const DRILL_BLOCKS: &str = "\
N10 T1 M06
N20 S3183 M03
N30 G00 X50.000 Y25.000 Z22.000
N40 G01 Z-10.000 F318
N50 G00 Z22.000
N60 M05
N70 M30
";

#[test]
fn single_drill_operation() {
    let p = emit_program(&[drill_op()]);
    assert_eq!(p.header, DEFAULT_HEADER);
    assert_eq!(p.to_text(), format!("({DEFAULT_HEADER})\n{DRILL_BLOCKS}"));
    assert_eq!(parse_program(&p.to_text()).unwrap(), p);
}

#[test]
fn drill_program_streams() {
    let p = emit_program(&[drill_op()]);
    let (g, f) = split_program(&p);
    let numbers = |e: &[neurocnc::nc::StreamEntry]| e.iter().map(|e| e.number).collect::<Vec<_>>();
    assert_eq!(numbers(&g.entries), vec![30, 40, 50]);
    assert_eq!(numbers(&f.entries), vec![10, 20, 60, 70]);
    assert_eq!(g.to_text(), "N30 G00 X50.000 Y25.000 Z22.000\nN40 G01 Z-10.000 F318\nN50 G00 Z22.000\n");
    assert_eq!(merge_streams(&g, &f).unwrap(), p);
}

#[test]
fn mixed_block_goes_to_both_streams() {
    let p = parse_program("N10 G01 Z-10.000 F318 M08\nN20 M30\n").unwrap();
    let (g, f) = split_program(&p);
    let addrs = |w: &[neurocnc::nc::Word]| w.iter().map(|w| w.address).collect::<Vec<_>>();
    assert_eq!(g.entries[0].number, 10);
    assert_eq!(addrs(&g.entries[0].words), vec![Address::G, Address::Z, Address::F]);
    assert_eq!(f.entries[0].number, 10);
    assert_eq!(addrs(&f.entries[0].words), vec![Address::M]);
}

#[test]
fn unsupported_and_missing_end() {
    use neurocnc::nc::NcError;
    assert_eq!(parse_program("N10 G07 X0\nN20 M30"), Err(NcError::UnsupportedWord("G07".into())));
    assert_eq!(parse_program("N10 G00 X0\n"), Err(NcError::MissingEnd));
    assert!(matches!(
        parse_program("N10 G00 X0\nN20 G01 X1 G00\nN30 M30"),
        Err(NcError::SyntaxError { line: 2, .. })
    ));
}
