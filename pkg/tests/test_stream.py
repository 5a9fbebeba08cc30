"""Need-buffer analysis, heuristics, prediction, queues, and the simulation."""

import math

import numpy as np
import pytest

from vtlab import core, stream
from vtlab.core import VirtualTextureFile
from vtlab.render import Camera, FrameBuffers, render_reference
from vtlab.runtime import VtRuntime
from vtlab.stream import (
    HeuristicConfig,
    SimConfig,
    StreamQueue,
    analyze,
    ancestor_closure,
    compute_priorities,
    hotspot_center,
    lookahead_camera,
    merge_need,
    noise_scale,
    random_priority,
    simulate,
)

MIPS = 4  # pyramid depth used for synthetic need buffers


def need_frame(shape, entries, far=100.0):
    """Build FrameBuffers with the given (y, x) -> (px, py, mip, depth) pixels."""
    h, w = shape
    fb = FrameBuffers(
        color=np.zeros((h, w, 3), np.uint8),
        depth=np.full((h, w), far),
        need_x=np.full((h, w), -1, np.int32),
        need_y=np.full((h, w), -1, np.int32),
        need_mip=np.full((h, w), -1, np.int32),
    )
    for (y, x), (px, py, mip, depth) in entries.items():
        fb.need_x[y, x] = px
        fb.need_y[y, x] = py
        fb.need_mip[y, x] = mip
        fb.depth[y, x] = depth
    return fb


def resident_set(*pages, total=85):
    out = np.zeros(total, bool)
    out[list(pages)] = True
    return out


class TestAnalyze:
    def test_single_resident_page_all_hits(self):
        fb = need_frame((4, 4), {(y, x): (0, 0, 0, 1.0) for y in range(4) for x in range(4)})
        meta = core.TextureMeta(page_size=16, border=0, mip_count=MIPS)
        stats = analyze(fb, meta, resident_set(0))
        assert stats.pages.tolist() == [0]
        assert stats.pixel_count.tolist() == [16]
        assert stats.hits == 16 and stats.misses == 0

    def test_half_misses(self):
        entries = {}
        for y in range(4):
            for x in range(4):
                if x < 2:
                    entries[(y, x)] = (0, 0, 1, 1.0)  # page A: mip 1 page (0,0) -> abs 1
                else:
                    entries[(y, x)] = (0, 0, 0, 1.0)  # page B: the root, resident
        fb = need_frame((4, 4), entries)
        meta = core.TextureMeta(page_size=16, border=0, mip_count=MIPS)
        stats = analyze(fb, meta, resident_set(0))
        assert stats.pages.tolist() == [0, 1]
        assert stats.misses == 8 and stats.hits == 8

    def test_empty_buffer(self):
        fb = need_frame((4, 4), {})
        meta = core.TextureMeta(page_size=16, border=0, mip_count=MIPS)
        stats = analyze(fb, meta, resident_set(0))
        assert len(stats.pages) == 0
        assert stats.hits == 0 and stats.misses == 0

    def test_scratch_mirrored_into_page_table(self, small_world):
        from vtlab.runtime import PageTable
        meta = core.TextureMeta(page_size=16, border=0, mip_count=MIPS)
        table = PageTable(meta)
        fb = need_frame((2, 2), {(0, 0): (1, 1, 2, 3.0), (0, 1): (1, 1, 2, 5.0)})
        stats = analyze(fb, meta, resident_set(0), table=table)
        p = int(stats.pages[0])
        assert table.needed[p]
        assert table.pixel_count[p] == 2
        assert table.distance_sum[p] == pytest.approx(8.0)


class TestPriorities:
    def make_stats(self, **over):
        base = dict(
            pages=np.array([7]), pixel_count=np.array([37]),
            weighted_sum=np.array([12.5]), distance_sum=np.array([0.0]),
            min_mip=np.array([2]),
        )
        base.update(over)
        return stream.PageStats(**base)

    def test_pixel_sum(self):
        pri = compute_priorities(self.make_stats(), HeuristicConfig("pixel_sum"), 0)
        assert pri[7] == 37.0

    def test_distance_zero_depth_is_max(self):
        pri = compute_priorities(self.make_stats(), HeuristicConfig("distance"), 0)
        assert pri[7] == 1.0

    def test_distance_decreases_with_depth(self):
        near = compute_priorities(self.make_stats(distance_sum=np.array([37.0])),
                                  HeuristicConfig("distance"), 0)
        far = compute_priorities(self.make_stats(distance_sum=np.array([370.0])),
                                 HeuristicConfig("distance"), 0)
        assert far[7] < near[7] < 1.0

    def test_weighted_pixel_endpoints(self):
        meta = core.TextureMeta(page_size=16, border=0, mip_count=MIPS)
        # odd viewport so one pixel sits exactly at the center
        center_px = need_frame((255, 255), {(127, 127): (0, 0, 0, 1.0)})
        stats = analyze(center_px, meta, resident_set(0))
        pri = compute_priorities(stats, HeuristicConfig("weighted_pixel"), 0)
        assert pri[0] == pytest.approx(1.0)
        corner_px = need_frame((255, 255), {(0, 0): (0, 0, 0, 1.0)})
        stats = analyze(corner_px, meta, resident_set(0))
        pri = compute_priorities(stats, HeuristicConfig("weighted_pixel"), 0)
        assert pri[0] == pytest.approx(0.05)

    def test_random_is_reproducible_and_uniformish(self):
        vals = [random_priority(9, 4, p) for p in range(2000)]
        assert vals == [random_priority(9, 4, p) for p in range(2000)]
        assert 0.0 <= min(vals) and max(vals) < 1.0
        assert abs(np.mean(vals) - 0.5) < 0.05
        assert random_priority(9, 5, 0) != random_priority(9, 4, 0)


class TestHotspotCenter:
    VIEW = (200, 100)

    def test_no_rotation_is_midpoint(self):
        assert hotspot_center(0.0, 0.0, 10.0, self.VIEW) == (100.0, 50.0)

    def test_large_yaw_saturates_to_border(self):
        cx, cy = hotspot_center(math.radians(45), 0.0, stream.DEFAULT_HOTSPOT_GAIN, self.VIEW)
        assert cx == 200.0 and cy == 50.0
        cx, _ = hotspot_center(-math.radians(45), 0.0, stream.DEFAULT_HOTSPOT_GAIN, self.VIEW)
        assert cx == 0.0

    def test_both_axes_saturated_is_corner(self):
        cx, cy = hotspot_center(math.radians(45), math.radians(45),
                                stream.DEFAULT_HOTSPOT_GAIN, self.VIEW)
        assert (cx, cy) == (200.0, 0.0)  # right edge, top edge

    def test_default_gain_saturates_at_five_degrees(self):
        cx, _ = hotspot_center(math.radians(5), 0.0, stream.DEFAULT_HOTSPOT_GAIN, self.VIEW)
        assert cx == pytest.approx(200.0)
        cx, _ = hotspot_center(math.radians(2.5), 0.0, stream.DEFAULT_HOTSPOT_GAIN, self.VIEW)
        assert cx == pytest.approx(150.0)


class TestNoiseScale:
    def setup_method(self):
        self.mip_count = 3
        self.noise = np.zeros(21, np.float32)
        self.source_mip = np.zeros(21, np.int32)

    def test_resident_page_scales_to_zero(self):
        p = 5
        self.source_mip[p] = 2  # resident at its own mip: empty chain
        out = noise_scale({p: 10.0}, self.noise, self.source_mip, self.mip_count)
        assert out[p] == 0.0

    def test_single_link_chain(self):
        p = int(core.abs_index(core.PageId(2, 0, 0)))
        self.noise[p] = 2.5
        self.source_mip[p] = 1  # fallback is the parent
        out = noise_scale({p: 10.0}, self.noise, self.source_mip, self.mip_count)
        assert out[p] == pytest.approx(25.0)

    def test_two_link_chain_accumulates(self):
        p = int(core.abs_index(core.PageId(2, 0, 0)))
        parent = int(core.abs_index(core.PageId(1, 0, 0)))
        self.noise[p] = 2.0
        self.noise[parent] = 3.0
        self.source_mip[p] = 0  # falls back to the root
        out = noise_scale({p: 10.0}, self.noise, self.source_mip, self.mip_count)
        assert out[p] == pytest.approx(50.0)

    def test_uniform_texture_zeroes_everything(self):
        pris = {p: float(p + 1) for p in range(5, 21)}
        out = noise_scale(pris, self.noise, self.source_mip, self.mip_count)
        assert all(v == 0.0 for v in out.values())


class TestLookahead:
    def test_no_motion_identical(self):
        cam = Camera((1.0, 2.0, 3.0), yaw=0.3, pitch=0.1)
        out = lookahead_camera(cam, cam)
        assert out == cam

    def test_rotation_doubles(self):
        prev = Camera((0, 0, 0), yaw=0.0)
        cur = Camera((0, 0, 0), yaw=math.radians(45))
        out = lookahead_camera(cur, prev)
        assert out.yaw == pytest.approx(math.radians(90))

    def test_translation_doubles(self):
        prev = Camera((0, 0, 0))
        cur = Camera((0, 0, -2.0))
        out = lookahead_camera(cur, prev)
        assert out.position == (0.0, 0.0, -4.0)


class TestMergeNeed:
    def test_zero_weight_is_primary(self):
        assert merge_need({1: 5.0}, {2: 8.0}, 0.0) == {1: 5.0, 2: 0.0}

    def test_lookahead_only_page(self):
        assert merge_need({}, {2: 8.0}, 1.0)[2] == 8.0

    def test_page_in_both(self):
        assert merge_need({3: 5.0}, {3: 8.0}, 0.5)[3] == pytest.approx(9.0)

    def test_weight_out_of_range(self):
        with pytest.raises(ValueError):
            merge_need({}, {}, 1.5)


class TestAncestorClosure:
    def test_parent_priority_is_child_sum(self):
        # two mip-2 siblings under the absent mip-1 page (0, 0)
        c1 = int(core.abs_index(core.PageId(2, 0, 0)))
        c2 = int(core.abs_index(core.PageId(2, 1, 1)))
        parent = int(core.abs_index(core.PageId(1, 0, 0)))
        resident = resident_set(0, total=21)
        out = ancestor_closure({c1: 3.0, c2: 5.0}, resident, 3)
        assert out[parent] == pytest.approx(8.0)

    def test_resident_ancestors_not_added(self):
        c1 = int(core.abs_index(core.PageId(2, 0, 0)))
        resident = resident_set(0, 1, 2, 3, 4, total=21)
        out = ancestor_closure({c1: 3.0}, resident, 3)
        assert set(out) == {c1}

    def test_noise_skip_removes_quiet_ancestor(self):
        c1 = int(core.abs_index(core.PageId(2, 0, 0)))
        parent = int(core.abs_index(core.PageId(1, 0, 0)))
        noise = np.full(21, 5.0, np.float32)
        noise[c1] = 0.1  # child adds nearly nothing over the parent
        resident = resident_set(0, total=21)
        out = ancestor_closure({c1: 3.0}, resident, 3, noise=noise, skip_threshold=1.0)
        assert parent not in out
        out = ancestor_closure({c1: 3.0}, resident, 3, noise=noise, skip_threshold=0.05)
        assert parent in out

    def test_chain_propagates_to_root_side(self):
        leaf = int(core.abs_index(core.PageId(2, 3, 3)))
        mid = int(core.abs_index(core.PageId(1, 1, 1)))
        resident = resident_set(0, total=21)
        out = ancestor_closure({leaf: 4.0}, resident, 3)
        assert out[mid] == pytest.approx(4.0)
        assert 0 not in out  # root is resident


class TestStreamQueue:
    def test_priority_order_with_ties(self):
        q = StreamQueue({5: 1.0, 9: 2.0, 7: 2.0}, 4)
        assert q.pop() == (7, 2.0)  # max priority, lowest index first
        assert q.pop() == (9, 2.0)
        assert q.pop() == (5, 1.0)
        assert q.pop() is None

    def test_extern_orders_by_mip_first(self):
        mip2 = int(core.abs_index(core.PageId(2, 0, 0)))
        mip1 = int(core.abs_index(core.PageId(1, 0, 0)))
        q = StreamQueue({mip2: 100.0, mip1: 1.0}, 4, mode="extern")
        assert q.pop()[0] == mip1

    def test_intern_returns_root_most_queued_ancestor(self):
        leaf = int(core.abs_index(core.PageId(3, 0, 0)))
        mid = int(core.abs_index(core.PageId(2, 0, 0)))
        top = int(core.abs_index(core.PageId(1, 0, 0)))
        q = StreamQueue({leaf: 100.0, mid: 1.0, top: 2.0}, 4, intern=True)
        assert q.pop()[0] == top
        assert q.pop()[0] == mid
        assert q.pop()[0] == leaf

    def test_positive_scaling_keeps_dequeue_order(self):
        rng = np.random.default_rng(3)
        entries = {int(p): float(v) for p, v in
                   zip(rng.choice(85, 20, replace=False), rng.uniform(0.1, 9, 20))}
        scaled = {p: 17.5 * v for p, v in entries.items()}
        a = StreamQueue(entries, 4)
        b = StreamQueue(scaled, 4)
        order_a = [a.pop()[0] for _ in range(len(entries))]
        order_b = [b.pop()[0] for _ in range(len(entries))]
        assert order_a == order_b


def run_sim(world, cameras, sim, heur, frames_x=19, frames_y=19, viewport=(96, 96)):
    vt = VirtualTextureFile(world["vtx"])
    rt = VtRuntime(vt, frames_x, frames_y, noise=world["noise"])
    try:
        return simulate(world["mesh"], cameras, rt, sim, heur, viewport)
    finally:
        vt.close()


class TestSimulate:
    def static_cams(self, n=40):
        cam = Camera((0.0, 0.0, 0.0), fov_y=math.radians(70), near=0.05, far=100.0)
        return [cam] * n

    def test_budget_respected(self, small_world):
        result = run_sim(small_world, self.static_cams(10),
                         SimConfig(budget=3, preload_visible=False),
                         HeuristicConfig("pixel_sum"))
        per_frame = {}
        for e in result.log:
            per_frame[e.frame] = per_frame.get(e.frame, 0) + 1
        assert max(per_frame.values()) <= 3

    def test_full_residency_streams_nothing(self, small_world):
        vt = VirtualTextureFile(small_world["vtx"])
        rt = VtRuntime(vt, 19, 19)
        for p in range(vt.meta.total_pages):
            rt.insert(vt.read_page(p))
        rt.update()
        result = simulate(small_world["mesh"], self.static_cams(4), rt,
                          SimConfig(budget=5, preload_visible=False),
                          HeuristicConfig("pixel_sum"), (96, 96))
        vt.close()
        assert result.log == []
        ref = render_reference(small_world["mesh"], self.static_cams(1)[0],
                               small_world["meta"], small_world["chain"], (96, 96))
        for fb in result.frames:
            assert np.array_equal(fb.color, ref.color)

    def test_static_camera_converges_to_reference(self, small_world):
        cams = self.static_cams(80)
        result = run_sim(small_world, cams, SimConfig(budget=1, preload_visible=False),
                         HeuristicConfig("pixel_sum"))
        ref = render_reference(small_world["mesh"], cams[0], small_world["meta"],
                               small_world["chain"], (96, 96))
        assert np.array_equal(result.frames[-1].color, ref.color)
        assert result.misses[-1] == 0
        # one page per frame, each dispatched exactly once
        dispatched = [e.p_abs for e in result.log]
        assert len(dispatched) == len(set(dispatched))

    def test_deterministic_runs(self, small_world):
        cams = self.static_cams(12)
        cfg = SimConfig(budget=2, preload_visible=False)
        heur = HeuristicConfig("random", seed=123)
        a = run_sim(small_world, cams, cfg, heur)
        b = run_sim(small_world, cams, cfg, heur)
        assert [(e.frame, e.p_abs, e.priority) for e in a.log] == \
               [(e.frame, e.p_abs, e.priority) for e in b.log]
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.color, fb.color)

    def test_preload_makes_first_frame_clean(self, small_world):
        result = run_sim(small_world, self.static_cams(2),
                         SimConfig(budget=1, preload_visible=True),
                         HeuristicConfig("pixel_sum"))
        assert result.misses[0] == 0

    def test_extern_mips_non_decreasing_within_frame(self, small_world):
        result = run_sim(small_world, self.static_cams(60),
                         SimConfig(budget=4, preload_visible=False, ancestor="extern"),
                         HeuristicConfig("pixel_sum"))
        by_frame = {}
        for e in result.log:
            by_frame.setdefault(e.frame, []).append(e.mip)
        for mips in by_frame.values():
            assert mips == sorted(mips)

    def test_intern_ancestors_dispatched_first(self, small_world):
        result = run_sim(small_world, self.static_cams(60),
                         SimConfig(budget=4, preload_visible=False, ancestor="intern"),
                         HeuristicConfig("pixel_sum"))
        seen = {0}  # root resident from initialization
        for e in result.log:
            page = core.from_abs(e.p_abs, small_world["meta"].mip_count)
            for anc in core.ancestors(page):
                assert core.abs_index(anc) in seen
            seen.add(e.p_abs)

    def test_latency_delays_arrivals_without_redispatch(self, small_world):
        cams = self.static_cams(90)
        result = run_sim(small_world, cams,
                         SimConfig(budget=1, preload_visible=False, latency=3),
                         HeuristicConfig("pixel_sum"))
        dispatched = [e.p_abs for e in result.log]
        assert len(dispatched) == len(set(dispatched))
        ref = render_reference(small_world["mesh"], cams[0], small_world["meta"],
                               small_world["chain"], (96, 96))
        assert np.array_equal(result.frames[-1].color, ref.color)

    def test_noise_scaling_requires_table(self, small_world):
        vt = VirtualTextureFile(small_world["vtx"])
        rt = VtRuntime(vt, 19, 19, noise=None)
        with pytest.raises(ValueError):
            simulate(small_world["mesh"], self.static_cams(2), rt,
                     SimConfig(budget=1, preload_visible=False),
                     HeuristicConfig("pixel_sum", noise_scaling=True), (96, 96))
        vt.close()


class TestPathIo:
    def test_camera_path_roundtrip(self, tmp_path):
        cams = [Camera((0.5, 1.5, -2.0), yaw=0.25, pitch=-0.1),
                Camera((1.0, 0.0, 3.0), yaw=-1.0, pitch=0.2)]
        path = str(tmp_path / "path.txt")
        stream.save_camera_path(cams, path)
        back = stream.load_camera_path(path)
        for a, b in zip(cams, back):
            assert a.position == b.position
            assert a.yaw == b.yaw and a.pitch == b.pitch

    def test_stream_log_format(self, tmp_path):
        log = [stream.StreamEvent(0, 5, 1, 2.25, "pixel_sum")]
        path = str(tmp_path / "log.csv")
        stream.save_stream_log(log, path)
        lines = open(path).read().splitlines()
        assert lines[0] == "frame,p_abs,mip,priority,heuristic"
        assert lines[1] == "0,5,1,2.25,pixel_sum"
