//! Plain-text listing of a pulse sequence: a header with totals, then one
//! primitive per line as `kind<TAB>label<TAB>role<TAB>duration_ns`.

use std::fmt::Write;

use nvreadout_core::protocol::{sequence_duration, GateRole, Primitive, PulseSequence, TimingBudget};
use nvreadout_core::pulse::LaserRole;

fn role_name(role: GateRole) -> &'static str {
    match role {
        GateRole::Prepare => "prepare",
        GateRole::Store => "store",
        GateRole::Readout => "readout",
        GateRole::Correction => "correction",
        GateRole::Polarize => "polarize",
    }
}

pub fn format_sequence(seq: &PulseSequence, timing: &TimingBudget) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# readouts={} correction_blocks={} steps={} duration_us={:.3}",
        seq.readout_slots(),
        seq.correction_blocks(),
        seq.steps.len(),
        sequence_duration(seq, timing)
    )
    .unwrap();
    out.push_str("# kind\tlabel\trole\tduration_ns\n");
    for p in &seq.steps {
        let ns = timing.primitive_ns(p);
        match p {
            Primitive::Gate { label, role } => writeln!(out, "gate\t{label}\t{}\t{ns:.1}", role_name(*role)),
            Primitive::Laser(LaserRole::Init) => writeln!(out, "laser\tinit\t-\t{ns:.1}"),
            Primitive::Laser(LaserRole::Readout) => writeln!(out, "laser\treadout\t-\t{ns:.1}"),
            Primitive::Wait(_) => writeln!(out, "wait\t-\t-\t{ns:.1}"),
        }
        .unwrap();
    }
    out
}
