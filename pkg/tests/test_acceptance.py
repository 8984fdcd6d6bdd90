"""Acceptance gate: one timed test per release criterion.

Each test checks one contract at its stated tolerance and prints a
single PASS line (visible with ``pytest -s`` or ``-rA``); a violated
tolerance or a blown time budget fails the test.  The bindings-parity
criterion for the companion Node package runs in that package's own
suite, not here.
"""

import hashlib
import time
from collections import Counter

import numpy as np

from viewforge.compositor import (
    POLICY_BRANCHES,
    AugPolicy,
    ViewPairConfig,
    make_view_pair,
)
from viewforge.config import PipelineConfig
from viewforge.core import (
    BinaryMask,
    PixelBox,
    RasterImage,
    derive_stream,
    fold_seed,
    iou,
    resize_bilinear,
)
from viewforge.cropper import (
    CropParams,
    ResizeTargetParams,
    sample_area_crop,
    sample_constrained_pair,
)
from viewforge.fileio import save_png
from viewforge.gdomain import (
    GuidanceField,
    SolveDomain,
    SolverSettings,
    detect_edges,
    seamless_clone,
    solve_poisson,
    texture_flatten,
    texture_flatten_region,
)
from viewforge.pipeline import policy_branch_of, run_generate
from viewforge.saliency import extract_object_boxes, rand_gray_background
from viewforge.warp import AppearanceParams, ElasticParams, displacement_field, elastic_deform

from poisson_oracle import NEIGHBOR_OFFSETS, dense_poisson_solve, random_connected_domain
from saliency_oracle import brute_force_object_boxes, random_blob_mask

TIGHT = SolverSettings(tolerance=1e-8, max_iterations=40000)
AUGS_OFF = AppearanceParams(blur_prob=0, jitter_prob=0, grayscale_prob=0, hflip_prob=0)

# small sources and paste targets keep the pair-generation criteria fast
# without skipping any real code path
SMALL_VIEW = dict(
    resize=ResizeTargetParams(side_range=(24, 32)),
    appearance=AUGS_OFF,
)


def _report(name, t0, budget):
    elapsed = time.monotonic() - t0
    assert elapsed < budget, f"{name}: {elapsed:.1f}s exceeds the {budget}s budget"
    print(f"PASS {name} ({elapsed:.1f}s / {budget}s)", flush=True)


def rgb(seed, h, w):
    rng = np.random.default_rng(seed)
    return RasterImage.from_array(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def region(img, box):
    return img.data[box.y0 : box.y1, box.x0 : box.x1]


def test_criterion_01_poisson_solver_matches_dense_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(1001)
    for trial in range(50):
        h = int(rng.integers(3, 17))
        w = int(rng.integers(3, 17))
        c = int(rng.choice([1, 3]))
        bits = random_connected_domain(rng, h, w)
        boundary = rng.uniform(0.0, 255.0, size=(h, w, c))
        div = rng.uniform(-20.0, 20.0, size=(h, w, c))
        want = dense_poisson_solve(bits, boundary, div)
        got = solve_poisson(SolveDomain(BinaryMask(bits), boundary), GuidanceField(div), TIGHT)
        assert np.max(np.abs(got - want)) <= 1e-6, f"trial {trial}"
    _report("criterion-01 poisson solver vs dense elimination (<=1e-6, 50 domains)", t0, 10)


def test_criterion_02_seamless_clone_identities():
    t0 = time.monotonic()
    dst = rgb(1002, 40, 52)
    bits = np.zeros((40, 52), dtype=bool)
    bits[3:37, 4:48] = True
    mask = BinaryMask(bits)
    settings = SolverSettings(tolerance=1e-6, max_iterations=40000)

    cloned = seamless_clone(dst, dst, mask, settings=settings)
    assert np.max(np.abs(cloned.to_floats() - dst.to_floats())) <= 1e-4

    src = rgb(1003, 40, 52)
    out = seamless_clone(src, dst, mask, settings=settings)
    assert np.array_equal(out.data[~bits], dst.data[~bits])

    const_src = RasterImage.from_array(np.full((40, 52, 3), 80, dtype=np.uint8))
    const_dst = RasterImage.from_array(np.full((40, 52, 3), 200, dtype=np.uint8))
    const_out = seamless_clone(const_src, const_dst, mask, settings=settings)
    assert np.all(const_out.data == 200)
    _report("criterion-02 seamless-clone identities (self/outside/constant)", t0, 5)


def test_criterion_03_texture_flatten_contracts():
    t0 = time.monotonic()
    const = RasterImage.from_array(np.full((30, 34, 3), 137, dtype=np.uint8))
    assert np.array_equal(texture_flatten(const, settings=TIGHT).data, const.data)

    textured = rgb(1004, 30, 34)
    all_edges = texture_flatten(
        textured, settings=TIGHT, edges=BinaryMask.full(34, 30, True)
    )
    assert np.max(np.abs(all_edges.to_floats() - textured.to_floats())) <= 1e-4

    step = np.full((48, 48, 3), 40, dtype=np.uint8)
    step[:, 24:] = 200
    img = RasterImage.from_array(step)
    out = texture_flatten(img, settings=TIGHT)
    outf = out.to_floats()
    edges = detect_edges(img).bits
    checked = 0
    for y in range(2, 46):
        for x in range(2, 46):
            pixels = [(y, x), (y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)]
            if any(edges[p] for p in pixels):
                continue
            lap = (
                4 * outf[y, x]
                - outf[y - 1, x]
                - outf[y + 1, x]
                - outf[y, x - 1]
                - outf[y, x + 1]
            )
            # tolerance: solver residual (1e-8) plus commit rounding of
            # five 8-bit samples, half a level each
            assert np.max(np.abs(lap)) <= 2.6
            checked += 1
    assert checked > 500
    _report("criterion-03 texture-flatten contracts (identity/all-edges/|lap|<=2.6)", t0, 10)


def test_criterion_04_tfns_contracts():
    t0 = time.monotonic()
    rng = np.random.default_rng(1005)
    arr = np.clip(120 + rng.uniform(-50, 50, size=(28, 28, 3)), 0, 255).astype(np.uint8)
    img = RasterImage.from_array(arr)
    yy, xx = np.mgrid[0:28, 0:28]
    disc = BinaryMask((yy - 14) ** 2 + (xx - 14) ** 2 <= 36)

    out = texture_flatten_region(img, disc, settings=TIGHT)
    assert np.array_equal(out.data[disc.bits], img.data[disc.bits])

    assert np.array_equal(
        texture_flatten_region(img, BinaryMask.full(28, 28, True), settings=TIGHT).data,
        img.data,
    )

    none_salient = texture_flatten_region(img, BinaryMask.full(28, 28, False), settings=TIGHT)
    plain = texture_flatten(img, settings=TIGHT)
    assert np.max(np.abs(none_salient.to_floats() - plain.to_floats())) <= 1e-4

    imgf, outf = img.to_floats(), out.to_floats()
    edges = detect_edges(img).bits
    omega = ~disc.bits.copy()
    omega[0, :] = omega[-1, :] = omega[:, 0] = omega[:, -1] = False
    checked = 0
    for y in range(1, 27):
        for x in range(1, 27):
            if not omega[y, x]:
                continue
            lhs = np.zeros(3)
            rhs = np.zeros(3)
            for dy, dx in NEIGHBOR_OFFSETS:
                ny, nx = y + dy, x + dx
                lhs += outf[y, x]
                if omega[ny, nx]:
                    lhs -= outf[ny, nx]
                else:
                    rhs += outf[ny, nx]
                if edges[y, x] or edges[ny, nx]:
                    rhs += imgf[y, x] - imgf[ny, nx]
            # commit rounding across up to nine 8-bit samples
            assert np.max(np.abs(lhs - rhs)) <= 4.1
            checked += 1
    assert checked > 100
    _report("criterion-04 non-salient flattening contracts (residual <= 4.1)", t0, 10)


def test_criterion_05_crop_sampler_statistics():
    t0 = time.monotonic()
    p = CropParams(min_area_frac=0.45)
    g = derive_stream(2025, 0, 0)
    total = 640 * 480
    fracs = np.empty(100_000)
    for i in range(100_000):
        fracs[i] = sample_area_crop(640, 480, p, g).area / total
    assert fracs.min() >= 0.45
    assert fracs.max() <= 1.0
    assert abs(fracs.mean() - 0.725) <= 0.01

    pair_params = CropParams(iou_threshold=0.7)
    g2 = derive_stream(2025, 1, 0)
    satisfied = 0
    for _ in range(400):
        a, b, ok = sample_constrained_pair(200, 200, pair_params, g2)
        if ok:
            satisfied += 1
            assert iou(a, b) >= 0.7
    assert satisfied > 0
    _report("criterion-05 crop statistics (1e5 draws, mean 0.725 +/- 0.01)", t0, 30)


def test_criterion_06_saliency_boxes_match_flood_fill():
    t0 = time.monotonic()
    rng = np.random.default_rng(1006)
    for trial in range(100):
        bits = random_blob_mask(rng, 64, 64)
        min_area = int(rng.integers(1, 40))
        got = extract_object_boxes(BinaryMask(bits), min_area)
        want = [PixelBox(*b) for _, b in brute_force_object_boxes(bits, min_area)]
        assert got == want, f"trial {trial}"
    _report("criterion-06 object boxes vs flood-fill oracle (100 masks, exact)", t0, 5)


def test_criterion_07_policy_mixing_frequencies():
    t0 = time.monotonic()
    sources = [rgb(3000 + i, 32, 32) for i in range(16)]
    bgs = (rgb(3100, 256, 256), rgb(3101, 256, 256))
    cfg = ViewPairConfig(
        policy=AugPolicy(0.25, 0.25, 0.25, 0.25),
        **SMALL_VIEW,
    )
    counts = Counter()
    for i in range(10_000):
        rec = make_view_pair(sources[i % 16], None, cfg, bgs, fold_seed(77, i))
        counts[policy_branch_of(rec.strategy_used)] += 1
    for branch in POLICY_BRANCHES:
        freq = counts[branch] / 10_000
        assert abs(freq - 0.25) <= 0.02, f"{branch}: {freq:.4f}"
    _report("criterion-07 policy mixing (1e4 pairs, each branch 0.25 +/- 0.02)", t0, 120)


def test_criterion_08_query_only_augmentation():
    t0 = time.monotonic()
    sources = [rgb(4000 + i, 40, 40) for i in range(8)]
    bgs = (rgb(4100, 256, 256), rgb(4101, 256, 256))
    one_hot = [
        AugPolicy(poisson_blend=1.0, baseline=0.0),
        AugPolicy(texture_flatten=1.0, baseline=0.0),
        AugPolicy(elastic=1.0, baseline=0.0),
        AugPolicy(baseline=1.0),
    ]
    for policy in one_hot:
        cfg = ViewPairConfig(policy=policy, **SMALL_VIEW)
        for i in range(40):
            src = sources[i % 8]
            rec = make_view_pair(src, None, cfg, bgs, fold_seed(88, i))
            crop = src.crop(rec.key_src_box)
            want = resize_bilinear(crop, rec.key_box.width, rec.key_box.height)
            assert np.array_equal(region(rec.key_img, rec.key_box), want.data)
    _report("criterion-08 key view untouched under every policy branch (bitwise)", t0, 60)


def test_criterion_09_composite_geometry():
    t0 = time.monotonic()
    sources = [rgb(5000 + i, 36, 36) for i in range(8)]
    bgs = (rgb(5100, 256, 256), rgb(5101, 256, 256))
    cfg = ViewPairConfig(policy=AugPolicy(0.25, 0.25, 0.25, 0.25), **SMALL_VIEW)
    for i in range(1000):
        src = sources[i % 8]
        rec = make_view_pair(src, None, cfg, bgs, fold_seed(99, i))
        for img in (rec.query_img, rec.key_img):
            assert img.data.shape == (256, 256, 3)
        for box in (rec.query_box, rec.key_box):
            assert 0 <= box.x0 < box.x1 <= 256
            assert 0 <= box.y0 < box.y1 <= 256
        crop = src.crop(rec.key_src_box)
        want = resize_bilinear(crop, rec.key_box.width, rec.key_box.height)
        assert np.array_equal(region(rec.key_img, rec.key_box), want.data)
    _report("criterion-09 composite geometry (1000 pairs, 256x256, RoIs in-bounds)", t0, 120)


def test_criterion_10_end_to_end_determinism(tmp_path):
    t0 = time.monotonic()
    corpus = tmp_path / "in"
    corpus.mkdir()
    rng = np.random.default_rng(1010)
    for i in range(20):
        arr = rng.integers(0, 256, (60 + i % 4, 80 - i % 3, 3), dtype=np.uint8)
        save_png(RasterImage.from_array(arr), corpus / f"s{i:02d}.png")

    def run(out_name, workers):
        cfg = PipelineConfig(
            input_dir=corpus,
            output_dir=tmp_path / out_name,
            master_seed=20,
            pairs_per_image=10,
            workers=workers,
        )
        summary = run_generate(cfg)
        assert summary.pairs_emitted == 200
        h = hashlib.sha256()
        for p in sorted((tmp_path / out_name).rglob("*")):
            if p.is_file():
                h.update(p.name.encode())
                h.update(p.read_bytes())
        return h.hexdigest()

    first = run("a", 1)
    assert run("b", 1) == first
    assert run("c", 8) == first
    _report("criterion-10 end-to-end determinism (200 pairs, reruns + workers 1/8)", t0, 180)


def test_criterion_11_elastic_contracts():
    t0 = time.monotonic()
    img = rgb(1011, 40, 40)
    frozen = elastic_deform(img, ElasticParams(alpha=0.0), derive_stream(11, 0, 0))
    assert np.array_equal(frozen.data, img.data)

    p = ElasticParams()  # alpha 34
    bound = p.alpha * (1 + 1e-9)  # smoothing is a convex average of U(-1,1) draws
    for i in range(1000):
        dx, dy = displacement_field(24, 32, p, derive_stream(12, i, 0))
        assert np.max(np.abs(dx)) <= bound
        assert np.max(np.abs(dy)) <= bound
    _report("criterion-11 elastic contracts (alpha=0 bitwise, |disp| <= alpha, 1e3 fields)", t0, 10)


def test_criterion_12_rand_gray_background():
    t0 = time.monotonic()
    img = rgb(1012, 60, 60)
    rng = np.random.default_rng(1013)
    bits = random_blob_mask(rng, 60, 60)
    assert bits.any() and not bits.all()
    mask = BinaryMask(bits)
    out = rand_gray_background(img, mask, derive_stream(13, 0, 0))
    assert np.array_equal(out.data[mask.bits], img.data[mask.bits])
    rest = out.data[~mask.bits]
    assert rest.size > 0
    assert np.unique(rest).size == 1  # one gray level across all channels
    _report("criterion-12 random-gray background (salient bitwise, one gray level)", t0, 5)
