use crate::data::{SensorChannel, SensorDataset};
use crate::error::{Error, Result};

/// Fills short runs of missing samples by linear interpolation between the
/// nearest valid neighbours.
///
/// A run is filled when the missing time it spans, `t_next - t_prev` minus one
/// sample period, is at most `max_gap_s`. Longer runs, and runs touching either
/// end of a channel, stay invalid so that windows overlapping them can be dropped.
pub fn impute_missing(ds: &SensorDataset, max_gap_s: f64) -> Result<SensorDataset> {
    if !(max_gap_s > 0.0) {
        return Err(Error::Config(format!("max_gap_s must be positive, got {max_gap_s}")));
    }
    let mut out = ds.clone();
    for (key, ch) in out.channels.iter_mut() {
        impute_channel(ch, max_gap_s).map_err(|_| {
            Error::InvalidDataset(format!(
                "channel {}/{}/{} has no valid samples",
                key.subject, key.sensor_id, key.channel_id
            ))
        })?;
    }
    Ok(out)
}

fn impute_channel(ch: &mut SensorChannel, max_gap_s: f64) -> Result<(), ()> {
    let period = 1.0 / ch.sampling_rate_hz;
    let samples = &mut ch.samples;
    if !samples.iter().any(|s| s.valid) {
        return Err(());
    }
    let mut prev_valid: Option<usize> = None;
    let mut i = 0;
    while i < samples.len() {
        if samples[i].valid {
            prev_valid = Some(i);
            i += 1;
            continue;
        }
        let run_start = i;
        while i < samples.len() && !samples[i].valid {
            i += 1;
        }
        let (Some(lo), true) = (prev_valid, i < samples.len()) else {
            continue;
        };
        let hi = i;
        let (t0, v0) = (samples[lo].t, samples[lo].value);
        let (t1, v1) = (samples[hi].t, samples[hi].value);
        // small tolerance so that gaps of exactly max_gap_s survive float noise in timestamps
        if t1 - t0 - period > max_gap_s + 1e-9 {
            continue;
        }
        for s in &mut samples[run_start..hi] {
            let frac = (s.t - t0) / (t1 - t0);
            s.value = v0 + frac * (v1 - v0);
            s.valid = true;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ChannelKey, Sample, SensorSpec};
    use std::collections::BTreeMap;

    fn dataset(samples: Vec<Sample>, rate: f64) -> SensorDataset {
        let mut channels = BTreeMap::new();
        channels.insert(
            ChannelKey::new("s1", "A", "x"),
            SensorChannel::new("A", "x", rate, samples).unwrap(),
        );
        SensorDataset {
            name: "t".into(),
            subjects: vec!["s1".into()],
            sensors: vec![SensorSpec {
                sensor_id: "A".into(),
                channel_ids: vec!["x".into()],
                sampling_rate_hz: rate,
                quality_tier: Default::default(),
            }],
            channels,
            labels: BTreeMap::new(),
            class_set: vec![],
        }
    }

    fn samples_of(ds: &SensorDataset) -> &[Sample] {
        &ds.channel("s1", "A", "x").unwrap().samples
    }

    #[test]
    fn midpoint_interpolation() {
        let ds = dataset(vec![Sample::valid(0.0, 1.0), Sample::missing(1.0), Sample::valid(2.0, 3.0)], 1.0);
        let out = impute_missing(&ds, 1.0).unwrap();
        assert_eq!(samples_of(&out)[1], Sample::valid(1.0, 2.0));
    }

    #[test]
    fn all_valid_is_noop() {
        let ds = dataset((0..5).map(|i| Sample::valid(i as f64, i as f64 * 2.0)).collect(), 1.0);
        assert_eq!(impute_missing(&ds, 1.0).unwrap(), ds);
    }

    #[test]
    fn long_gap_stays_invalid() {
        let mut s = vec![Sample::valid(0.0, 0.0)];
        s.extend((1..=5).map(|i| Sample::missing(i as f64)));
        s.push(Sample::valid(6.0, 6.0));
        let out = impute_missing(&dataset(s, 1.0), 1.0).unwrap();
        assert!(samples_of(&out)[1..6].iter().all(|s| !s.valid));
    }

    #[test]
    fn edges_stay_invalid() {
        let s = vec![Sample::missing(0.0), Sample::valid(1.0, 1.0), Sample::missing(2.0)];
        let out = impute_missing(&dataset(s, 1.0), 10.0).unwrap();
        assert!(!samples_of(&out)[0].valid && !samples_of(&out)[2].valid);
    }

    #[test]
    fn no_valid_samples_is_error() {
        let ds = dataset(vec![Sample::missing(0.0), Sample::missing(1.0)], 1.0);
        assert!(impute_missing(&ds, 1.0).is_err());
    }

    #[test]
    fn idempotent_and_preserves_valid() {
        let s = vec![
            Sample::valid(0.0, 1.0),
            Sample::missing(0.1),
            Sample::missing(0.2),
            Sample::valid(0.3, 4.0),
            Sample::missing(0.4),
            Sample::valid(0.5, 0.0),
        ];
        let ds = dataset(s.clone(), 10.0);
        let once = impute_missing(&ds, 0.5).unwrap();
        let twice = impute_missing(&once, 0.5).unwrap();
        assert_eq!(once, twice);
        for (a, b) in s.iter().zip(samples_of(&once)) {
            if a.valid {
                assert_eq!(a, b);
            }
        }
        assert!((samples_of(&once)[1].value - 2.0).abs() < 1e-12);
    }
}
