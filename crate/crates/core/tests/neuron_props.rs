use proptest::prelude::*;
use sparse_snn::neuron::{
    lif_step, output_accumulate, spike_maxpool, FixedPoint, LifParams, LifState, PoolConfig,
    ResetMode,
};
use sparse_snn::tensor::SpikeTensor;

fn trace(current: f64, steps: usize) -> Vec<bool> {
    let lif = LifParams::default();
    let mut st = LifState::new(1);
    (0..steps)
        .map(|_| {
            lif_step(&[FixedPoint::from_f64(current)], &mut st, &lif)
                .unwrap()
                .spikes[0]
        })
        .collect()
}

#[test]
fn constant_current_traces() {
    assert_eq!(trace(0.4, 3), [false, false, true]);
    assert_eq!(trace(0.3, 3), [false, false, false]);
    assert_eq!(trace(0.6, 3), [true, true, true]);
}

#[test]
fn subtractive_reset_keeps_residue() {
    let lif = LifParams::new(FixedPoint::from_f64(0.5), 2, ResetMode::Subtract).unwrap();
    let mut st = LifState::new(1);
    let out = lif_step(&[FixedPoint::from_f64(0.75)], &mut st, &lif).unwrap();
    assert!(out.spikes[0]);
    assert_eq!(st.membrane()[0], FixedPoint::from_f64(0.25));
}

proptest! {
    #[test]
    fn larger_current_never_removes_first_spike(a in 0i16..2000, b in 0i16..2000) {
        let (lo, hi) = (a.min(b), a.max(b));
        let lif = LifParams::default();
        let fire = |i: i16| {
            let mut st = LifState::new(1);
            lif_step(&[FixedPoint(i)], &mut st, &lif).unwrap().spikes[0]
        };
        prop_assert!(!fire(lo) || fire(hi));
    }

    #[test]
    fn hard_reset_zeroes_membrane(v0 in -1000i16..1000, i in -1000i16..1000) {
        let lif = LifParams::default();
        let mut st = LifState::from_membrane(vec![FixedPoint(v0)]);
        let out = lif_step(&[FixedPoint(i)], &mut st, &lif).unwrap();
        if out.spikes[0] {
            prop_assert_eq!(st.membrane()[0], FixedPoint(0));
        } else {
            prop_assert_eq!(st.membrane()[0].raw() as i32, ((v0 >> 2) as i32) + i as i32);
        }
    }

    #[test]
    fn output_accumulate_is_linear(
        xs in prop::collection::vec(-64i16..64, 4),
        ys in prop::collection::vec(-64i16..64, 4),
    ) {
        // per-step currents: [x0, x1] and [y0, y1] for two neurons; T = 2 and
        // sums stay even so the mean is exact
        let mk = |v: &[i16]| vec![
            vec![FixedPoint(v[0] * 2), FixedPoint(v[1] * 2)],
            vec![FixedPoint(v[2] * 2), FixedPoint(v[3] * 2)],
        ];
        let sum: Vec<i16> = xs.iter().zip(&ys).map(|(a, b)| a + b).collect();
        let fx = output_accumulate(&mk(&xs)).unwrap();
        let fy = output_accumulate(&mk(&ys)).unwrap();
        let fs = output_accumulate(&mk(&sum)).unwrap();
        for n in 0..2 {
            prop_assert_eq!(fs[n].raw(), fx[n].raw() + fy[n].raw());
        }
    }

    #[test]
    fn pooled_spikes_are_or_of_window(bits in prop::collection::vec(any::<bool>(), 16)) {
        let s = SpikeTensor::from_vec(1, 1, 4, 4, bits.clone()).unwrap();
        let p = spike_maxpool(&s, PoolConfig::default());
        prop_assert_eq!(p.dims(), (1, 1, 2, 2));
        for y in 0..2 {
            for x in 0..2 {
                let any = (0..2).any(|dy| (0..2).any(|dx| bits[(2 * y + dy) * 4 + 2 * x + dx]));
                prop_assert_eq!(p.get(0, 0, y, x), any);
            }
        }
    }
}
