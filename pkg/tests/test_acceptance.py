"""Acceptance gate: one test per release criterion, tolerances pinned.

Each test prints a PASS line with the measured numbers so a -v -s run doubles
as the release report. The occlusion experiment sits last because it dominates
the suite's runtime (a 100-seed sweep of 200-sample datasets).
"""

import time

import numpy as np

from agmn.experiments import (
    occlusion_sweep,
    run_bp_batched,
    stack_dataset,
    unary_argmax_batched,
)
from agmn.graph import Schedule, build_schedule, check_schedule, default_hand_tree, tree_layout
from agmn.grids import (
    Grid2D,
    TensorStack,
    conv2d_same,
    normalize_sum,
    read_tensor,
    write_tensor,
)
from agmn.inference import InferOptions, infer, message_update, run_bp
from agmn.metrics import (
    DEFAULT_SIGMAS,
    LossWeights,
    final_loss,
    frobenius_sq,
    pck,
    pairwise_loss,
    total_loss,
    unary_loss,
)
from agmn.oracle import exact_marginals_bruteforce, naive_message, random_potentials
from agmn.potentials import KeypointSet, PotentialSet
from agmn.synth import CorruptionConfig, make_samples


def rel_dev(got, want):
    denom = np.maximum(np.abs(want), 1e-300)
    return float(np.max(np.abs(got - want) / denom))


def peak_rel_dev(got, want):
    # Deviation relative to each channel's peak; elementwise relative error is
    # meaningless on Gaussian-tail cells holding only representation noise.
    diff = np.abs(got - want).max(axis=(-2, -1))
    peak = np.abs(want).max(axis=(-2, -1))
    return float((diff / peak).max())


def hand_scale_instance(seed):
    """Random nonnegative potentials at production shape (21 nodes, 46x46
    grids, 45x45 reflection-paired kernels)."""
    g = default_hand_tree()
    schedule = build_schedule(g)
    rng = np.random.default_rng(seed)
    unary = rng.random((21, 46, 46))
    kernels = np.empty((40, 45, 45))
    for a, b in g.edges:
        fwd = rng.random((45, 45))
        kernels[schedule.channel_of[(a, b)]] = fwd
        kernels[schedule.channel_of[(b, a)]] = fwd[::-1, ::-1]
    return PotentialSet(
        unary=TensorStack(unary), kernels=TensorStack(kernels), graph=g, schedule=schedule
    )


def test_exactness_against_bruteforce():
    """100 seeded instances, trees of 2..4 nodes, grids <= 5x5, kernels 3/5:
    engine marginals match exhaustive enumeration within 1e-9 relative."""
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        n = 2 + seed % 3
        grid = 3 + (seed // 3) % 3
        kernel = 3 if (seed // 9) % 2 == 0 else 5
        ps = random_potentials(seed, n, grid, kernel)
        reference = exact_marginals_bruteforce(ps)
        result = run_bp(ps)
        worst = max(worst, rel_dev(result.marginals.data, reference.data))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9
    assert elapsed < 60.0
    print(f"PASS exactness: 100 instances, max rel dev {worst:.3e}, {elapsed:.1f}s")


def test_conv_form_equals_naive_sum():
    """1000 random (h, kernel) pairs: the convolution-form message equals the
    literal double sum within 1e-12 absolute, before and after normalization."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        hr, hc = rng.integers(1, 10, size=2)
        kr, kc = rng.choice([1, 3, 5, 7], size=2)
        h = Grid2D(rng.random((hr, hc)))
        k = Grid2D(rng.random((int(kr), int(kc))))
        raw = naive_message(h, k)
        worst = max(worst, float(np.max(np.abs(conv2d_same(h, k).data - raw.data))))
        got = message_update(h, k).data
        want = normalize_sum(raw).data
        worst = max(worst, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-12
    assert elapsed < 30.0
    print(f"PASS conv-form: 1000 pairs, max abs dev {worst:.3e}, {elapsed:.1f}s")


def test_schedule_forty_messages_and_order_invariance():
    """The 21-node tree needs exactly 40 messages, replay-valid; a second
    dependency-valid ordering reproduces the marginals within 1e-12."""
    tree = default_hand_tree()
    schedule = build_schedule(tree)
    assert len(schedule.order) == 40
    check_schedule(tree, schedule.order)

    ps = hand_scale_instance(seed=424242)
    base = run_bp(ps)
    parent_of, depth_of = tree_layout(tree)
    non_root = [v for v in range(21) if v != tree.root]
    inward = sorted(non_root, key=lambda v: (-depth_of[v], -v))
    outward = sorted(non_root, key=lambda v: (depth_of[v], -v))
    alt_order = tuple(
        [(v, parent_of[v]) for v in inward] + [(parent_of[v], v) for v in outward]
    )
    assert alt_order != schedule.order
    check_schedule(tree, alt_order)
    alt = PotentialSet(
        unary=ps.unary,
        kernels=ps.kernels,
        graph=tree,
        schedule=Schedule(order=alt_order, channel_of=schedule.channel_of),
    )
    dev = float(np.max(np.abs(run_bp(alt).marginals.data - base.marginals.data)))
    assert dev <= 1e-12
    print(f"PASS schedule: 40 messages, replay ok, alt-order dev {dev:.3e}")


def test_scale_invariance():
    """Scaling any single unary or kernel channel by 1e-3 or 1e3 moves no
    normalized marginal by more than 1e-9 and flips no prediction."""
    ps = random_potentials(8, 4, 4, 3)
    base = run_bp(ps)
    worst = 0.0
    for factor in (1e-3, 1e3):
        for ch in range(ps.unary.channels):
            scaled = ps.unary.data.copy()
            scaled[ch] *= factor
            alt = PotentialSet(
                unary=TensorStack(scaled), kernels=ps.kernels,
                graph=ps.graph, schedule=ps.schedule,
            )
            got = run_bp(alt)
            worst = max(worst, float(np.max(np.abs(got.marginals.data - base.marginals.data))))
            assert got.predictions == base.predictions
        for ch in range(ps.kernels.channels):
            scaled = ps.kernels.data.copy()
            scaled[ch] *= factor
            alt = PotentialSet(
                unary=ps.unary, kernels=TensorStack(scaled),
                graph=ps.graph, schedule=ps.schedule,
            )
            got = run_bp(alt)
            worst = max(worst, float(np.max(np.abs(got.marginals.data - base.marginals.data))))
            assert got.predictions == base.predictions
    assert worst <= 1e-9

    # Spot check at production scale.
    hand = hand_scale_instance(seed=5)
    hand_base = run_bp(hand)
    scaled_unary = hand.unary.data.copy()
    scaled_unary[7] *= 1e3
    scaled_kernels = hand.kernels.data.copy()
    scaled_kernels[3] *= 1e-3
    alt = PotentialSet(
        unary=TensorStack(scaled_unary), kernels=TensorStack(scaled_kernels),
        graph=hand.graph, schedule=hand.schedule,
    )
    got = run_bp(alt)
    hand_dev = float(np.max(np.abs(got.marginals.data - hand_base.marginals.data)))
    assert hand_dev <= 1e-9
    assert got.predictions == hand_base.predictions
    print(f"PASS scale invariance: worst marginal shift {max(worst, hand_dev):.3e}")


def test_clean_fixed_point():
    """50 uncorrupted samples with exact kernels: both the structured route
    and the bare unary argmax hit PCK 1.0 at the tightest threshold."""
    samples = make_samples(50, CorruptionConfig(seed=0))
    tree = default_hand_tree()
    bp_preds, unary_preds, gts = [], [], []
    for s in samples:
        bp_preds.append(infer(s.unary, s.kernels, tree).keypoints())
        unary_preds.append(
            infer(s.unary, None, tree, InferOptions(unary_only=True)).keypoints()
        )
        gts.append(s.gt)
    norms = [s.norm_len for s in samples]
    bp_curve = pck(bp_preds, gts, norms, sigmas=(0.01,))
    unary_curve = pck(unary_preds, gts, norms, sigmas=(0.01,))
    assert bp_curve.values == (1.0,)
    assert unary_curve.values == (1.0,)
    print("PASS clean fixed point: n=50, bp pck@0.01 = 1.0, unary pck@0.01 = 1.0")


def test_performance_budget():
    """Single-image inference (21x46x46 unary, 40x45x45 kernels) under 500 ms
    on the direct path; the frequency path matches within 1e-6 of each map's
    peak and is faster."""
    sample = make_samples(1, CorruptionConfig(seed=3))[0]
    tree = default_hand_tree()

    def best_of(n, fn):
        times = []
        for _ in range(n):
            t0 = time.perf_counter()
            out = fn()
            times.append(time.perf_counter() - t0)
        return min(times), out

    infer(sample.unary, sample.kernels, tree)  # warmup
    t_direct, direct = best_of(
        3, lambda: infer(sample.unary, sample.kernels, tree)
    )
    t_fft, freq = best_of(
        3, lambda: infer(sample.unary, sample.kernels, tree, InferOptions(conv_path="fft"))
    )
    dev = peak_rel_dev(freq.marginals.data, direct.marginals.data)
    assert t_direct < 0.5
    assert dev <= 1e-6
    assert freq.predictions == direct.predictions
    assert t_fft < t_direct
    print(
        f"PASS performance: direct {t_direct * 1e3:.0f} ms, fft {t_fft * 1e3:.0f} ms, "
        f"fft dev {dev:.3e}"
    )


def test_format_round_trip(tmp_path):
    """100 random stacks, alternating dtypes: write then read is the identity
    at the stored precision (bitwise for f64, bitwise post-rounding for f32)."""
    rng = np.random.default_rng(99)
    for i in range(100):
        shape = tuple(int(rng.integers(1, 7)) for _ in range(3))
        data = rng.standard_normal(shape)
        dtype = "f64" if i % 2 == 0 else "f32"
        if dtype == "f32":
            data = data.astype(np.float32).astype(np.float64)
        stack = TensorStack(data)
        p = tmp_path / f"rt_{i}.agt"
        write_tensor(stack, p, dtype=dtype)
        back = read_tensor(p)
        np.testing.assert_array_equal(back.data, stack.data)
    print("PASS format round-trip: 100 stacks, both dtypes, bitwise")


def test_loss_identities():
    """Every pinned metric identity, exact equality where stated."""
    # Threshold semantics.
    gt = KeypointSet(np.array([[3.0, 4.0], [10.0, 2.0]]))
    assert pck([gt], [gt], norm_len=46.0).values == tuple([1.0] * 10)
    off = KeypointSet(np.array([[7.0, 4.0], [10.0, 2.0]]))
    curve = pck([off], [gt], norm_len=100.0, sigmas=(0.03, 0.05))
    assert curve.values == (0.5, 1.0)
    assert len(DEFAULT_SIGMAS) == 10

    # Frobenius.
    a = Grid2D(np.array([[3.0]]))
    z = Grid2D(np.array([[0.0]]))
    assert frobenius_sq(a, a) == 0.0
    assert frobenius_sq(a, z) == 9.0
    assert frobenius_sq(a, z) == frobenius_sq(z, a)

    # Stage losses: 21 and 40 channels, stage additivity, residual scaling.
    u_target = TensorStack(np.zeros((21, 2, 2)))
    u_stage_data = np.zeros((21, 2, 2))
    for k in range(21):
        u_stage_data[k, 0, 0] = float(k)
    u_stage = TensorStack(u_stage_data)
    assert unary_loss([u_target], u_target) == 0.0
    assert unary_loss([u_stage], u_target) == float(sum(k * k for k in range(21)))
    assert unary_loss([u_stage, u_stage], u_target) == 2.0 * unary_loss([u_stage], u_target)

    p_target = TensorStack(np.zeros((40, 2, 2)))
    p_stage_data = np.zeros((40, 2, 2))
    for k in range(40):
        p_stage_data[k, 1, 1] = float(k)
    p_stage = TensorStack(p_stage_data)
    assert pairwise_loss([p_target], p_target) == 0.0
    assert pairwise_loss([p_stage], p_target) == float(sum(k * k for k in range(40)))
    doubled = TensorStack(2.0 * p_stage_data)
    assert pairwise_loss([doubled], p_target) == 4.0 * pairwise_loss([p_stage], p_target)

    # Final loss: analytic example and channel-permutation invariance.
    uniform = TensorStack(np.full((1, 1, 2), 0.5))
    impulse = TensorStack(np.array([[[1.0, 0.0]]]))
    assert final_loss(uniform, impulse) == 0.5
    assert final_loss(impulse, impulse) == 0.0
    m = TensorStack(np.array([[[1.0, 0.0]], [[0.0, 1.0]], [[0.5, 0.5]]]))
    t = TensorStack(np.array([[[0.5, 0.5]], [[1.0, 0.0]], [[0.0, 1.0]]]))
    perm = [2, 0, 1]
    assert final_loss(
        TensorStack(m.data[perm]), TensorStack(t.data[perm])
    ) == final_loss(m, t)

    # Total loss.
    assert total_loss(1.0, 1.0, 1.0) == 1.2
    assert total_loss(1.0, 1.0, 1.0, LossWeights(alpha1=0.0, alpha2=0.0, alpha3=0.0)) == 0.0
    assert total_loss(4.0, 0.0, 0.0) == 4.0
    assert total_loss(0.0, 4.0, 0.0) == 0.4
    assert total_loss(0.0, 0.0, 4.0) == 0.4
    print("PASS loss identities: all pinned values exact, total_loss(1,1,1) = 1.2")


def test_occlusion_upper_bound():
    """Corrupted unaries plus exact displacement kernels: structure must beat
    the bare argmax at sigma 0.05 on the pinned dataset, and on at least 95 of
    100 dataset seeds. The margin is recorded, not asserted."""
    t0 = time.perf_counter()
    results = occlusion_sweep(
        seeds=range(100),
        n_samples=200,
        occluded_fraction=0.2,
        distractor_peaks=2,
        noise_amplitude=0.05,
        sigmas=(0.05,),
    )
    elapsed = time.perf_counter() - t0
    headline = next(r for r in results if r["seed"] == 42)
    bp_42 = headline["bp"].values[0]
    unary_42 = headline["unary"].values[0]
    gaps = [r["gap"][0] for r in results]
    positives = sum(1 for g in gaps if g > 0)
    assert bp_42 > unary_42
    assert positives >= 95
    assert elapsed < 300.0
    print(
        f"PASS occlusion upper bound: seed42 bp@0.05={bp_42:.4f} unary@0.05={unary_42:.4f} "
        f"gap={bp_42 - unary_42:+.4f}; positive gap {positives}/100 seeds "
        f"(min {min(gaps):+.4f}, mean {float(np.mean(gaps)):+.4f}); {elapsed:.0f}s"
    )


def test_batched_experiment_path_matches_serial_engine():
    """The throughput path used by the sweep is pinned to the serial engine:
    identical predictions, marginals within frequency tolerance."""
    samples = make_samples(
        6,
        CorruptionConfig(
            occluded_fraction=0.2, distractor_peaks=2, noise_amplitude=0.05, seed=42
        ),
    )
    unary, kernels = stack_dataset(samples)
    marginals, preds = run_bp_batched(unary, kernels)
    base = unary_argmax_batched(unary)
    tree = default_hand_tree()
    for s, sample in enumerate(samples):
        serial = infer(sample.unary, sample.kernels, tree)
        assert peak_rel_dev(marginals[s], serial.marginals.data) <= 1e-6
        np.testing.assert_array_equal(
            preds[s], [[p.row, p.col] for p in serial.predictions]
        )
        serial_base = infer(sample.unary, None, tree, InferOptions(unary_only=True))
        np.testing.assert_array_equal(
            base[s], [[p.row, p.col] for p in serial_base.predictions]
        )
    print("PASS batched-vs-serial: 6 samples, predictions identical")
