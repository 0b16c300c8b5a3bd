//! Implementations of the four subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use diqsdc_core::blockcode::{
    decode_block, dft_spectrum, eve_spectrum, simulate_block, BlockConfig, BlockDecode,
};
use diqsdc_core::channels::NoiseChannel;
use diqsdc_core::metrics::{
    capacity_closed_form, chsh_closed_form, loss_error_rates, qber_closed_form, second_round_state,
    LinkBudget, TransmissionRound,
};
use diqsdc_core::protocol::{run, ProtocolConfig, SettingsDistribution};
use diqsdc_core::qcore::{BellLabel, DensityMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::config::{
    parse_message_bits, BlockSection, ProtocolSection, Quantity, SweepSection, XAxis,
};
use crate::output::{format_value, write_csv, RunManifest};
use crate::CliError;

pub const SWEEP_CSV_HEADER: &str = "x,ratio,round_or_curve,value";

/// Exit status of a completed command; the protocol command distinguishes
/// an (expected) abort from a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandStatus {
    Completed,
    ProtocolAborted,
}

fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config serializes")
}

/// Data rows of a sweep, ordered x-major so the x column is monotone,
/// then by ratio, then by curve.
pub fn sweep_rows(spec: &SweepSection) -> Result<Vec<String>, CliError> {
    spec.validate()?;
    let kind = spec.channel.kind();
    let channels: Vec<NoiseChannel> = spec
        .ratios
        .iter()
        .map(|&r| NoiseChannel::from_ratio(kind, r).map_err(|e| CliError::usage(e.to_string())))
        .collect::<Result<_, _>>()?;

    let fixed_eta = || -> Result<f64, CliError> {
        if let Some(eta) = spec.fixed.eta {
            if !(0.0..=1.0).contains(&eta) {
                return Err(CliError::usage("fixed.eta must lie in [0, 1]"));
            }
            return Ok(eta);
        }
        let alpha = spec.fixed.alpha_db_per_km.expect("validated");
        let distance = spec.fixed.distance_km.expect("validated");
        Ok(LinkBudget::new(alpha, distance)
            .map_err(|e| CliError::usage(e.to_string()))?
            .efficiency())
    };

    let mut rows =
        Vec::with_capacity(spec.steps * spec.ratios.len() * spec.quantity.curves().len());
    for i in 0..spec.steps {
        let x = spec.x_min + (spec.x_max - spec.x_min) * i as f64 / (spec.steps - 1) as f64;
        for (ratio, channel) in spec.ratios.iter().zip(&channels) {
            let (p, eta) = match spec.x_axis {
                XAxis::GammaT => {
                    let p = channel
                        .decay(x)
                        .map_err(|e| CliError::usage(e.to_string()))?;
                    (p, fixed_eta()?)
                }
                XAxis::DistanceKm => {
                    let gamma_t = spec.fixed.gamma_t.expect("validated");
                    let p = channel
                        .decay(gamma_t)
                        .map_err(|e| CliError::usage(e.to_string()))?;
                    let alpha = spec.fixed.alpha_db_per_km.expect("validated");
                    let eta = LinkBudget::new(alpha, x)
                        .map_err(|e| CliError::usage(e.to_string()))?
                        .efficiency();
                    (p, eta)
                }
            };
            for &curve in spec.quantity.curves() {
                let value = match (spec.quantity, curve) {
                    (Quantity::Chsh, "S1") => {
                        chsh_closed_form(kind, p, eta, TransmissionRound::First)
                    }
                    (Quantity::Chsh, "S2") => {
                        chsh_closed_form(kind, p, eta, TransmissionRound::Second)
                    }
                    (Quantity::Qber, "Q1") => {
                        qber_closed_form(kind, p, eta, TransmissionRound::First)
                    }
                    (Quantity::Qber, "Q2") => {
                        qber_closed_form(kind, p, eta, TransmissionRound::Second)
                    }
                    // aborted (classically correlated) points plot as zero
                    (Quantity::Capacity, _) => {
                        capacity_closed_form(kind, p, eta).map_or(0.0, |cs| cs.max(0.0))
                    }
                    (Quantity::LossError, "r_lr") => loss_error_rates(p, eta).0,
                    (Quantity::LossError, "r_er") => loss_error_rates(p, eta).1,
                    _ => unreachable!("curve list matches quantity"),
                };
                rows.push(format!(
                    "{},{},{},{}",
                    format_value(x),
                    ratio,
                    curve,
                    format_value(value)
                ));
            }
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(spec: &SweepSection, out: &Path) -> Result<CommandStatus, CliError> {
    let started = Instant::now();
    let rows = sweep_rows(spec)?;
    write_csv(out, SWEEP_CSV_HEADER, &rows)?;
    let manifest_path = manifest_sibling(out);
    RunManifest::new("sweep", to_json(spec), None, &[out], started.elapsed())
        .write(&manifest_path)?;
    Ok(CommandStatus::Completed)
}

fn manifest_sibling(csv_path: &Path) -> PathBuf {
    let mut name = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    csv_path.with_file_name(name)
}

pub fn cmd_protocol(section: &ProtocolSection, out_dir: &Path) -> Result<CommandStatus, CliError> {
    let started = Instant::now();
    let channel = NoiseChannel::from_ratio(section.channel.kind.kind(), section.channel.ratio)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let link = LinkBudget::new(section.link.alpha_db_per_km, section.link.distance_km)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let config = ProtocolConfig {
        n_pairs: section.n_pairs,
        check_fraction: section.check_fraction,
        round2_check_fraction: section.round2_check_fraction,
        channel,
        gamma_t_per_hop: section.gamma_t_per_hop,
        link,
        seed: section.seed,
        message_bits: parse_message_bits(&section.message_bits)?,
        settings: SettingsDistribution::default(),
    };
    let outcome = run(&config).map_err(|e| CliError::usage(e.to_string()))?;

    std::fs::create_dir_all(out_dir)?;
    let outcome_path = out_dir.join("outcome.json");
    std::fs::write(
        &outcome_path,
        serde_json::to_string_pretty(&outcome).expect("outcome serializes"),
    )?;

    let mut rows = vec![round_csv_row("1", &outcome.round1)];
    if let Some(round2) = &outcome.round2 {
        rows.push(round_csv_row("2", round2));
    }
    let rounds_path = out_dir.join("rounds.csv");
    write_csv(
        &rounds_path,
        "round,s_hat,q_p_hat,q_b_hat,q_hat,case1,case2,case3,case4",
        &rows,
    )?;

    RunManifest::new(
        "protocol",
        to_json(section),
        Some(section.seed),
        &[&outcome_path, &rounds_path],
        started.elapsed(),
    )
    .write(&out_dir.join("manifest.json"))?;

    Ok(if outcome.aborted_at.is_some() {
        CommandStatus::ProtocolAborted
    } else {
        CommandStatus::Completed
    })
}

fn round_csv_row(label: &str, sample: &diqsdc_core::protocol::SecuritySample) -> String {
    format!(
        "{label},{},{},{},{},{},{},{},{}",
        format_value(sample.s_hat),
        format_value(sample.q_p_hat),
        format_value(sample.q_b_hat),
        format_value(sample.q_hat),
        sample.counts.case1,
        sample.counts.case2,
        sample.counts.case3,
        sample.counts.case4
    )
}

pub fn cmd_block_demo(section: &BlockSection, out_dir: &Path) -> Result<CommandStatus, CliError> {
    let started = Instant::now();
    let config = BlockConfig {
        block_duration: section.block_duration_s,
        photons_per_block: section.photons_per_block,
        expected_detections: section.expected_detections,
        freq_for_zero: section.freq_for_zero_hz,
        freq_for_one: section.freq_for_one_hz,
        freq_grid: BlockConfig::grid_with_step(section.grid_step_hz),
        seed: section.seed,
    };
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let message = parse_message_bits(&section.message_bits)?;

    let pair_state = match &section.noise {
        None => DensityMatrix::bell(BellLabel::PhiPlus),
        Some(noise) => {
            let channel = NoiseChannel::from_ratio(noise.kind.kind(), noise.ratio)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let p = channel
                .decay(noise.gamma_t_per_hop)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let eta = LinkBudget::new(noise.alpha_db_per_km, noise.distance_km)
                .map_err(|e| CliError::usage(e.to_string()))?
                .efficiency();
            second_round_state(channel.kind(), p, eta)
                .map_err(|e| CliError::usage(e.to_string()))?
        }
    };

    std::fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut decoded = String::with_capacity(message.len());
    let mut outputs: Vec<PathBuf> = Vec::new();
    for (index, &bit) in message.iter().enumerate() {
        let record = simulate_block(&config, bit, || pair_state.clone(), &mut rng);
        let bob = dft_spectrum(&record, &config.freq_grid)
            .unwrap_or_else(|_| vec![0.0; config.freq_grid.len()]);
        let eve = eve_spectrum(&record.timestamps(), &config, &mut rng);
        let spectrum_rows = |magnitudes: &[f64]| -> Vec<String> {
            config
                .freq_grid
                .iter()
                .zip(magnitudes)
                .map(|(&f, &m)| format!("{},{}", format_value(f), format_value(m)))
                .collect()
        };
        let bob_path = out_dir.join(format!("bob_block_{index}.csv"));
        write_csv(&bob_path, "frequency_hz,magnitude", &spectrum_rows(&bob))?;
        let eve_path = out_dir.join(format!("eve_block_{index}.csv"));
        write_csv(&eve_path, "frequency_hz,magnitude", &spectrum_rows(&eve))?;
        outputs.push(bob_path);
        outputs.push(eve_path);
        decoded.push(match decode_block(&record, &config) {
            BlockDecode::Bit0 => '0',
            BlockDecode::Bit1 => '1',
            BlockDecode::Undecodable => '?',
        });
    }

    let decoded_path = out_dir.join("decoded.json");
    let summary = serde_json::json!({
        "message": section.message_bits,
        "decoded": decoded,
        "blocks": message.len(),
    });
    std::fs::write(
        &decoded_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    outputs.push(decoded_path);

    let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    RunManifest::new(
        "block-demo",
        to_json(section),
        Some(section.seed),
        &output_refs,
        started.elapsed(),
    )
    .write(&out_dir.join("manifest.json"))?;
    Ok(CommandStatus::Completed)
}

/// The six figure-data sweeps at the pinned operating point: eta = 0.95
/// for the noise-parameter figures, gamma_t = 0.15 and 0.2 dB/km for the
/// distance figures, with ratios 0.1 (non-Markovian) and 5 (Markovian),
/// plus ratio 10 on the capacity curves.
pub fn figure_specs() -> Vec<(&'static str, SweepSection)> {
    use crate::config::{ChannelName, FixedSection};
    let eta_fixed = FixedSection {
        eta: Some(0.95),
        ..FixedSection::default()
    };
    let distance_fixed = FixedSection {
        gamma_t: Some(0.15),
        alpha_db_per_km: Some(0.2),
        ..FixedSection::default()
    };
    let sweep =
        |quantity, channel, ratios: &[f64], x_axis, x_max: f64, steps, fixed: &FixedSection| {
            SweepSection {
                quantity,
                channel,
                ratios: ratios.to_vec(),
                x_axis,
                x_min: 0.0,
                x_max,
                steps,
                fixed: fixed.clone(),
            }
        };
    vec![
        (
            "fig3a",
            sweep(
                Quantity::Chsh,
                ChannelName::Ad,
                &[0.1, 5.0],
                XAxis::GammaT,
                4.0,
                401,
                &eta_fixed,
            ),
        ),
        (
            "fig3b",
            sweep(
                Quantity::Chsh,
                ChannelName::Dephasing,
                &[0.1, 5.0],
                XAxis::GammaT,
                7.0,
                701,
                &eta_fixed,
            ),
        ),
        (
            "fig4a",
            sweep(
                Quantity::Qber,
                ChannelName::Ad,
                &[0.1, 5.0],
                XAxis::GammaT,
                4.0,
                401,
                &eta_fixed,
            ),
        ),
        (
            "fig4b",
            sweep(
                Quantity::Qber,
                ChannelName::Dephasing,
                &[0.1, 5.0],
                XAxis::GammaT,
                2.0,
                201,
                &eta_fixed,
            ),
        ),
        (
            "fig5a",
            sweep(
                Quantity::Capacity,
                ChannelName::Ad,
                &[0.1, 5.0, 10.0],
                XAxis::DistanceKm,
                2.0,
                401,
                &distance_fixed,
            ),
        ),
        (
            "fig5b",
            sweep(
                Quantity::Capacity,
                ChannelName::Dephasing,
                &[0.1, 5.0, 10.0],
                XAxis::DistanceKm,
                2.0,
                401,
                &distance_fixed,
            ),
        ),
    ]
}

pub fn cmd_figures(out_dir: &Path) -> Result<CommandStatus, CliError> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let specs = figure_specs();
    let mut outputs = Vec::new();
    for (name, spec) in &specs {
        let rows = sweep_rows(spec)?;
        let path = out_dir.join(format!("{name}.csv"));
        write_csv(&path, SWEEP_CSV_HEADER, &rows)?;
        outputs.push(path);
    }
    let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let config = serde_json::json!({
        "figures": specs
            .iter()
            .map(|(name, spec)| serde_json::json!({ "name": name, "sweep": to_json(spec) }))
            .collect::<Vec<_>>(),
    });
    RunManifest::new("figures", config, None, &output_refs, started.elapsed())
        .write(&out_dir.join("manifest.json"))?;
    Ok(CommandStatus::Completed)
}
