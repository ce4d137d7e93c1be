import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpiscma.channel import ReceivedFrame, draw_channel, noise_variance, superimpose
from cpiscma.codebook import Codebook, build_factor_graph, load_codebook
from cpiscma.index_map import build_lut
from cpiscma.mpa import N0_FLOOR
from cpiscma.mpad import (
    CandidateSet,
    MpadDetector,
    MpadParams,
    _coordinate_descent,
    build_candidates,
    cancel_reliable,
    candidate_slots,
    classify_pattern,
    count_error_patterns,
    detect_frame,
    pml_detect,
    reachable_pattern_cases,
)
from cpiscma.transmitter import BlockCodec, encode_block, make_block, render_slots
from reference import brute_force_pml, hand_candidates_4_2

CB = load_codebook()
FG = build_factor_graph(CB)
LUT42 = build_lut(4, 2)
LUT43 = build_lut(4, 3)
SCALE = math.sqrt(2)


@pytest.mark.parametrize("n, t, count", [(4, 2, 5), (4, 3, 4), (2, 1, 2), (8, 7, 8)])
def test_pattern_count_formula_and_structure(n, t, count):
    assert count_error_patterns(n, t) == count
    assert len(reachable_pattern_cases(build_lut(n, t))) == count


def test_classify_examples():
    assert classify_pattern([2, 0, 4, 0], LUT42).reliable
    p = classify_pattern([1, 3, 0, 0], LUT42)
    assert p.case == 2 and p.active == (0, 1)
    assert classify_pattern([0, 0, 0, 0], LUT42).case == 4
    assert classify_pattern([1, 1, 1, 1], LUT42).case == 0
    assert classify_pattern([0, 2, 2, 2], LUT42).case == 1
    assert classify_pattern([0, 0, 3, 0], LUT42).case == 3
    with pytest.raises(ValueError):
        classify_pattern([1, 0, 1], LUT42)


def test_case_matches_weight_and_legality():
    for dec in itertools.product(range(5), repeat=4):
        p = classify_pattern(dec, LUT42)
        legal = tuple(i for i in range(4) if dec[i]) in LUT42.rows
        assert p.reliable == legal
        if not legal:
            assert p.case == 4 - sum(1 for d in dec if d)


@pytest.mark.parametrize(
    "dec, size",
    [((1, 2, 3, 4), 4), ((0, 2, 3, 4), 2), ((3, 1, 0, 0), 16), ((0, 0, 2, 0), 8), ((0, 0, 0, 0), 64)],
)
def test_cardinalities_4_2(dec, size):
    cs = build_candidates(classify_pattern(dec, LUT42), LUT42, CB, 0)
    assert len(cs) == size


@pytest.mark.parametrize("dec, size", [((1, 2, 3, 4), 4), ((1, 2, 0, 0), 8), ((0, 0, 3, 0), 48), ((0,) * 4, 256)])
def test_cardinalities_4_3(dec, size):
    assert len(candidate_slots(dec, LUT43, 4)) == size


def test_case_examples_detail():
    case0 = candidate_slots((1, 2, 3, 4), LUT42, 4)
    assert {tuple(c) for c in case0} == {(1, 0, 3, 0), (0, 2, 0, 4), (0, 2, 3, 0), (1, 0, 0, 4)}
    case1 = candidate_slots((0, 2, 3, 4), LUT42, 4)
    assert {tuple(c) for c in case1} == {(0, 2, 0, 4), (0, 2, 3, 0)}
    case2 = candidate_slots((3, 1, 0, 0), LUT42, 4)
    actives = {tuple(i for i in range(4) if c[i]) for c in case2}
    assert actives == {(0, 2), (0, 3), (1, 2), (1, 3)}
    for c in case2:
        assert c[0] in (0, 3) and c[1] in (0, 1)


def test_reliable_pattern_rejected():
    with pytest.raises(ValueError):
        build_candidates(classify_pattern([1, 0, 1, 0], LUT42), LUT42, CB, 0)


def test_minimal_repair_equals_hand_enumeration():
    for dec in itertools.product(range(5), repeat=4):
        hand = hand_candidates_4_2(dec, LUT42.rows, 4)
        if hand is None:
            continue
        got = {tuple(int(v) for v in c) for c in candidate_slots(dec, LUT42, 4)}
        assert got == hand, dec


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([(4, 2), (4, 3), (2, 1), (5, 2), (6, 3)]), st.data())
def test_candidate_invariants(nt, data):
    n, t = nt
    lut = build_lut(n, t)
    dec = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    if classify_pattern(dec, lut).reliable:
        return
    cands = candidate_slots(dec, lut, 4)
    D = {i for i in range(n) if dec[i]}
    dists = [len(set(row) ^ D) for row in lut.rows]
    best = min(dists)
    expected = sum(4 ** len(set(row) - D) for row, d in zip(lut.rows, dists) if d == best)
    assert len(cands) == expected
    assert len({tuple(c) for c in cands}) == len(cands)
    for c in cands:
        active = tuple(i for i in range(n) if c[i])
        assert active in lut.rows
        for i in set(active) & D:
            assert c[i] == dec[i]


def test_cancel_reliable():
    rng = np.random.default_rng(0)
    ch = draw_channel(rng, 2, 4, 4)
    two = CB.entries[:2]
    cb2 = Codebook.from_array(two, strict=False)
    b0 = make_block((1, 0, 2, 0), cb2, 0)
    b1 = make_block((0, 3, 0, 4), cb2, 1)
    frame = superimpose([b0, b1], ch, 0.0)
    np.testing.assert_array_equal(cancel_reliable(frame.chips, ch.gains, {}), frame.chips)
    r = cancel_reliable(frame.chips, ch.gains, {0: b0})
    np.testing.assert_allclose(r, ch.gains[1] * b1.signal.reshape(-1), atol=1e-12)
    r = cancel_reliable(frame.chips, ch.gains, [(0, b0), (1, b1.signal)])
    np.testing.assert_allclose(r, 0, atol=1e-12)


def _noiseless_frame(rng, bits=None):
    blocks = []
    for j in range(6):
        b = rng.integers(0, 2, 6) if bits is None else bits[j]
        blocks.append(encode_block(b, LUT42, CB, j, SCALE))
    ch = draw_channel(rng, 6, 4, 4)
    return blocks, ch, superimpose(blocks, ch, 0.0)


def _set(j, dec):
    return CandidateSet(j=j, case=classify_pattern(dec, LUT42).case, candidates=candidate_slots(dec, LUT42, 4))


def test_pml_single_user_case1():
    rng = np.random.default_rng(1)
    blocks, ch, frame = _noiseless_frame(rng)
    true = np.array(blocks[2].slots)
    dec = true.copy()
    dec[[i for i in range(4) if not true[i]][0]] = 1  # spurious activation -> Case 1
    r = cancel_reliable(frame.chips, ch.gains, {j: blocks[j] for j in range(6) if j != 2})
    res = pml_detect(r, ch.gains, [_set(2, dec)], CB, SCALE)
    assert res.distance == pytest.approx(0, abs=1e-20)
    assert res.hypotheses == 2
    assert tuple(_set(2, dec).candidates[res.choice[2]]) == blocks[2].slots


def test_pml_two_users_matches_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(20):
        blocks, ch, frame = _noiseless_frame(rng)
        noisy = frame.chips + 0.3 * (rng.standard_normal(16) + 1j * rng.standard_normal(16))
        d1 = np.array(blocks[0].slots)
        d1[[i for i in range(4) if not d1[i]][0]] = 2
        d3 = np.zeros(4, dtype=int)
        first = blocks[4].active[0]
        d3[first] = blocks[4].slots[first]
        sets = [_set(0, d1), _set(4, d3)]
        assert [len(s) for s in sets] == [2, 8]
        r = cancel_reliable(noisy, ch.gains, {j: blocks[j] for j in (1, 2, 3, 5)})
        res = pml_detect(r, ch.gains, sets, CB, SCALE)
        contribs = [ch.gains[s.j] * render_slots(s.candidates, CB, s.j, SCALE).reshape(len(s), -1) for s in sets]
        combo, dist = brute_force_pml(r, contribs)
        assert res.hypotheses == 16 and not res.fallback
        assert (res.choice[0], res.choice[4]) == combo
        assert res.distance == pytest.approx(dist)


def test_pml_single_user_case4():
    cb1 = Codebook.from_array(CB.entries[:1], strict=False)
    rng = np.random.default_rng(3)
    block = encode_block(rng.integers(0, 2, 6), LUT42, cb1, 0, SCALE)
    ch = draw_channel(rng, 1, 4, 4)
    frame = superimpose([block], ch, 0.0)
    cs = CandidateSet(0, 4, candidate_slots((0, 0, 0, 0), LUT42, 4))
    res = pml_detect(frame.chips, ch.gains, [cs], cb1, SCALE)
    assert res.hypotheses == 64
    assert tuple(cs.candidates[res.choice[0]]) == block.slots


def test_pml_fallback_flagged():
    rng = np.random.default_rng(4)
    blocks, ch, frame = _noiseless_frame(rng)
    sets = [_set(j, (0, 0, 0, 0)) for j in range(3)]
    r = cancel_reliable(frame.chips, ch.gains, {j: blocks[j] for j in range(3, 6)})
    res = pml_detect(r, ch.gains, sets, CB, SCALE, cap=1000)
    assert res.fallback and res.hypotheses == 64**3
    for cs in sets:
        assert tuple(cs.candidates[res.choice[cs.j]]) in {tuple(c) for c in cs.candidates}


def test_coordinate_descent_never_worse_than_start():
    rng = np.random.default_rng(5)
    contribs = [rng.standard_normal((n, 8)) + 0j for n in (3, 5, 7)]
    r = rng.standard_normal(8) + 0j
    _, d = _coordinate_descent(r, contribs)
    start = float(np.sum(np.abs(r - sum(c[0] for c in contribs)) ** 2))
    assert d <= start


def test_pml_requires_nonempty_sets():
    with pytest.raises(RuntimeError):
        pml_detect(np.zeros(16), np.ones((6, 16)), [CandidateSet(0, 4, np.zeros((0, 4), dtype=int))], CB)


def test_detect_frame_noiseless():
    rng = np.random.default_rng(6)
    bits = rng.integers(0, 2, (6, 6))
    blocks, ch, _ = _noiseless_frame(rng, bits)
    ch.gains[:] = 1
    frame = ReceivedFrame(chips=superimpose(blocks, ch, 0.0).chips, noise_var=N0_FLOOR, channel=ch)
    got, diag = detect_frame(frame, CB, FG, LUT42, MpadParams(scale=SCALE))
    np.testing.assert_array_equal(got, bits)
    assert np.all(diag.case == -1)


def test_injected_case4_goes_through_pml():
    rng = np.random.default_rng(7)
    N0 = noise_variance(30, 6, 4)
    det = MpadDetector(CB, LUT42, MpadParams(scale=SCALE), FG)
    blocks, ch, _ = _noiseless_frame(rng)
    frame = superimpose(blocks, ch, N0, rng)
    dec = det.slot_decisions(frame.chips[None], ch.gains[None], N0)
    truth = np.array([b.slots for b in blocks])
    assert np.array_equal(dec[0], truth)
    dec[0, 3] = 0
    slots, diag = det.resolve(dec, frame.chips[None], ch.gains[None])
    assert diag.case[0, 3] == 4 and diag.search_size[0, 3] == 64
    assert list(diag.case[0, [0, 1, 2, 4, 5]]) == [-1] * 5
    np.testing.assert_array_equal(slots[0], truth)


def test_high_snr_ber():
    rng = np.random.default_rng(8)
    N0 = noise_variance(30, 6, 4)
    det = MpadDetector(CB, LUT42, MpadParams(scale=SCALE), FG)
    codec = BlockCodec(LUT42, 4)
    frames = 10_000
    bits = rng.integers(0, 2, (frames, 6, 6))
    slots = codec.encode(bits)
    sig = np.stack([render_slots(slots[:, j], CB, j, SCALE).reshape(frames, -1) for j in range(6)], axis=1)
    h = (rng.standard_normal(sig.shape) + 1j * rng.standard_normal(sig.shape)) / math.sqrt(2)
    y = np.sum(h * sig, axis=1)
    y = y + math.sqrt(N0 / 2) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    _, got, _ = det.detect(y, h, N0)
    assert np.mean(got != bits) < 1e-3
