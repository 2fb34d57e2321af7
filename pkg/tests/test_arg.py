"""Arg path tests: validation, breakpoints, materials, trees, projection,
summary statistics, and the event-log serialization."""

import io
import math

import pytest

from argsim.arg import (
    Arg,
    ArgParseError,
    breakpoints,
    local_tree,
    material_vectors,
    project_arg,
    read_arg,
    read_args,
    state_from_material,
    summary,
    validate_arg,
    write_arg,
)
from argsim.backintime import simulate_backintime
from argsim.config import SimConfig
from argsim.spatial import simulate_spatial
from argsim.state import Coalesce, Recombine, State


def build_arg(config, timed_events):
    """Hand-assemble an Arg by applying (time, event) pairs in order."""
    state = State.initial(config.n_samples)
    times, events, states = [], [], []
    for t, ev in timed_events:
        state = state.apply(ev)
        times.append(t)
        events.append(ev)
        states.append(state)
    return Arg(config, times, events, states)


def two_leaf_arg(t_coal=1.3):
    cfg = SimConfig(n_samples=2, rho=0.0, seed=0)
    return build_arg(cfg, [(t_coal, Coalesce(0, 1))])


def test_validate_engine_output():
    for seed in (0, 1, 2):
        cfg = SimConfig(n_samples=4, rho=1.0, seed=seed)
        assert validate_arg(simulate_backintime(cfg)).passed
        assert validate_arg(simulate_spatial(cfg)).passed


def test_validate_repeated_locus_fails_clause_c():
    cfg = SimConfig(n_samples=2, rho=1.0, seed=0)
    arg = build_arg(
        cfg,
        [
            (0.2, Recombine(0, 0.5)),
            (0.4, Recombine(1, 0.5)),  # same locus on the other lineage
            (0.6, Coalesce(0, 1)),
            (0.8, Coalesce(1, 2)),
            (1.0, Coalesce(0, 1)),
        ],
    )
    report = validate_arg(arg)
    assert not report.passed
    assert [v[1] for v in report.violations] == ["c"]
    assert "0.5" in report.render()


def test_validate_illegal_event_fails_clause_b():
    cfg = SimConfig(n_samples=2, rho=0.0, seed=0)
    arg = Arg(cfg, [1.0], [Coalesce(0, 5)], [State.absorbing(2)])
    report = validate_arg(arg)
    assert not report.passed
    assert any(v[1] == "b" for v in report.violations)


def test_validate_diverging_recorded_state_fails_clause_b():
    cfg = SimConfig(n_samples=3, rho=0.0, seed=0)
    good = State.initial(3).coalesce(0, 1)
    wrong = State.initial(3).coalesce(0, 2)
    arg = Arg(
        cfg,
        [0.5, 1.0],
        [Coalesce(0, 1), Coalesce(0, 1)],
        [wrong, State.absorbing(3)],
    )
    report = validate_arg(arg)
    assert not report.passed
    assert any(v[1] == "b" for v in report.violations)
    assert good != wrong


def test_validate_unfinished_path_fails_clause_d():
    cfg = SimConfig(n_samples=3, rho=0.0, seed=0)
    arg = build_arg(cfg, [(0.5, Coalesce(0, 1))])
    report = validate_arg(arg)
    assert not report.passed
    assert [v[1] for v in report.violations] == ["d"]


def test_validate_nonincreasing_times_fail_clause_e():
    cfg = SimConfig(n_samples=3, rho=0.0, seed=0)
    arg = build_arg(cfg, [(0.7, Coalesce(0, 1)), (0.7, Coalesce(0, 1))])
    report = validate_arg(arg)
    assert not report.passed
    assert any(v[1] == "e" for v in report.violations)


def test_breakpoints_empty_without_recombination():
    cfg = SimConfig(n_samples=4, rho=0.0, seed=3)
    assert breakpoints(simulate_backintime(cfg)) == ((), ())


def test_breakpoints_are_order_statistics_with_appearance_times():
    cfg = SimConfig(n_samples=2, rho=1.0, seed=0)
    arg = build_arg(
        cfg,
        [
            (0.4, Recombine(0, 0.7)),
            (0.9, Recombine(0, 0.2)),
            (1.1, Coalesce(0, 1)),
            (1.5, Coalesce(1, 2)),
            (1.8, Coalesce(0, 1)),
        ],
    )
    assert validate_arg(arg).passed
    loci, times = breakpoints(arg)
    assert loci == (0.2, 0.7)
    assert times == (0.9, 0.4)


def test_breakpoint_count_equals_recombination_events():
    for seed in range(30):
        cfg = SimConfig(n_samples=4, rho=1.5, seed=seed)
        arg = simulate_backintime(cfg)
        loci, _ = breakpoints(arg)
        n_rec = sum(1 for ev in arg.events if isinstance(ev, Recombine))
        assert len(loci) == n_rec


def test_material_vectors_at_zero_and_past_the_end():
    cfg = SimConfig(n_samples=3, rho=1.0, seed=11)
    arg = simulate_backintime(cfg)
    m = len(breakpoints(arg)[0])
    columns, vectors = material_vectors(arg, 0.0)
    assert len(columns) == m + 1
    assert len(vectors) == 3
    assert sorted(vectors) == [
        tuple(frozenset({j}) for _ in range(m + 1)) for j in (1, 2, 3)
    ]
    _, final = material_vectors(arg, arg.grand_mrca + 1.0)
    assert final == [tuple(frozenset({1, 2, 3}) for _ in range(m + 1))]


def test_material_roundtrip_rebuilds_states():
    for seed in range(60):
        cfg = SimConfig(n_samples=4, rho=1.0, seed=101, replicate_index=seed)
        arg = simulate_backintime(cfg)
        for t in (0.0, arg.times[len(arg.times) // 2], arg.grand_mrca):
            columns, vectors = material_vectors(arg, t)
            rebuilt = state_from_material(4, columns, vectors)
            assert rebuilt == arg.state_at(t)


def test_column_partition_at_every_event_time():
    cfg = SimConfig(n_samples=4, rho=2.0, seed=17)
    arg = simulate_backintime(cfg)
    full = frozenset({1, 2, 3, 4})
    for t in arg.times:
        columns, vectors = material_vectors(arg, t)
        for col in range(len(columns)):
            vals = [v[col] for v in vectors if v[col]]
            assert sum(len(v) for v in vals) == 4
            assert frozenset().union(*vals) == full


def test_local_tree_two_leaves():
    arg = two_leaf_arg(1.3)
    tree = local_tree(arg, 0.5)
    assert tree.levels == (
        (0.0, (frozenset({1}), frozenset({2}))),
        (1.3, (frozenset({1, 2}),)),
    )
    assert tree.height == 1.3
    assert tree.total_length == pytest.approx(2.6)
    assert tree.newick() == "(1:1.3,2:1.3);"


def test_local_tree_newick_nesting_order():
    cfg = SimConfig(n_samples=3, rho=0.0, seed=0)
    arg = build_arg(cfg, [(0.5, Coalesce(1, 2)), (1.0, Coalesce(0, 1))])
    assert local_tree(arg, 0.0).newick() == "(1:1.0,(2:0.5,3:0.5):0.5);"


def test_local_tree_constant_left_of_first_breakpoint():
    done = 0
    for seed in range(40):
        cfg = SimConfig(n_samples=4, rho=1.0, seed=7, replicate_index=seed)
        arg = simulate_backintime(cfg)
        loci, _ = breakpoints(arg)
        if not loci:
            continue
        a = local_tree(arg, 0.0)
        b = local_tree(arg, loci[0] / 2.0)
        assert a.levels == b.levels
        assert a.height == b.height and a.total_length == b.total_length
        done += 1
    assert done > 5


def test_local_tree_height_bounded_by_grand_mrca():
    for seed in range(25):
        cfg = SimConfig(n_samples=5, rho=1.0, seed=13, replicate_index=seed)
        arg = simulate_backintime(cfg)
        for s in (0.0, 0.33, 0.8):
            tree = local_tree(arg, s)
            assert tree.height <= arg.grand_mrca + 1e-15
            # partitions coarsen one merge at a time
            sizes = [len(p) for _, p in tree.levels]
            assert sizes == list(range(5, 0, -1))


def test_project_arg_at_zero_is_site_tree():
    cfg = SimConfig(n_samples=4, rho=1.5, seed=29)
    arg = simulate_backintime(cfg)
    path = project_arg(arg, 0.0)
    assert path.initial == State.initial(4).project(0.0)
    assert path.steps[-1][1].is_absorbed
    # a projection can only drop detail: its jumps are a subset of events
    assert path.jump_count <= arg.event_count


def test_project_arg_right_of_last_breakpoint_is_identity():
    for seed in range(30):
        cfg = SimConfig(n_samples=4, rho=1.0, seed=41, replicate_index=seed)
        arg = simulate_backintime(cfg)
        loci, _ = breakpoints(arg)
        s = (max(loci) + 1.0) / 2.0 if loci else 0.5
        path = project_arg(arg, s)
        assert path.jump_count == arg.event_count
        assert tuple(state for _, state in path.steps) == arg.states


def test_projection_jump_count_monotone_in_site():
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 0.999]
    for seed in range(25):
        cfg = SimConfig(n_samples=4, rho=2.0, seed=53, replicate_index=seed)
        arg = simulate_backintime(cfg)
        counts = [project_arg(arg, s).jump_count for s in grid]
        assert counts == sorted(counts)


def test_projection_preserves_site_partition():
    cfg = SimConfig(n_samples=4, rho=1.5, seed=61)
    arg = simulate_backintime(cfg)
    for s in (0.0, 0.3, 0.7):
        path = project_arg(arg, s)
        for t in arg.times:
            assert path.state_at(t).site_partition(s) == arg.state_at(t).site_partition(s)


def test_summary_kingman():
    cfg = SimConfig(n_samples=4, rho=0.0, seed=5)
    arg = simulate_backintime(cfg)
    stats = summary(arg)
    assert stats.breakpoint_count == 0
    assert stats.event_count == 3
    assert stats.max_lineages == 4
    assert stats.tmrca_at[0.0] == arg.grand_mrca


def test_summary_two_leaf_lengths():
    stats = summary(two_leaf_arg(1.3), sites=(0.0,))
    assert stats.length_at[0.0] == pytest.approx(2.6)
    assert stats.grand_mrca == 1.3


def test_summary_matches_local_tree():
    sites = (0.0, 0.25, 0.5, 0.75)
    for seed in range(40):
        cfg = SimConfig(n_samples=4, rho=1.5, seed=71, replicate_index=seed)
        arg = simulate_backintime(cfg)
        stats = summary(arg, sites=sites)
        for s in sites:
            tree = local_tree(arg, s)
            assert stats.tmrca_at[s] == pytest.approx(tree.height, rel=1e-12)
            assert stats.length_at[s] == pytest.approx(tree.total_length, rel=1e-9)
            assert stats.tmrca_at[s] <= stats.grand_mrca + 1e-15


def test_summary_event_identity():
    # every recombination must later re-coalesce: gamma = (N-1) + 2 |Bp|
    for seed in range(40):
        cfg = SimConfig(n_samples=5, rho=1.0, seed=83, replicate_index=seed)
        stats = summary(simulate_backintime(cfg))
        assert stats.event_count == 4 + 2 * stats.breakpoint_count


def test_serialization_roundtrip():
    cfg = SimConfig(n_samples=4, rho=1.5, density="beta:2,2", seed=12345, replicate_index=6)
    arg = simulate_backintime(cfg)
    buf = io.StringIO()
    write_arg(arg, buf)
    text = buf.getvalue()
    loaded = read_arg(io.StringIO(text))
    assert loaded.config == cfg
    assert loaded.times == arg.times
    assert loaded.events == arg.events
    assert loaded.states == arg.states
    buf2 = io.StringIO()
    write_arg(loaded, buf2)
    assert buf2.getvalue() == text


def test_serialization_multiple_replicates():
    cfg = SimConfig(n_samples=3, rho=1.0, seed=9)
    buf = io.StringIO()
    args = []
    for r in range(3):
        arg = simulate_backintime(cfg.with_replicate(r))
        args.append(arg)
        write_arg(arg, buf)
    loaded = read_args(io.StringIO(buf.getvalue()))
    assert len(loaded) == 3
    for got, want in zip(loaded, args):
        assert got.config.replicate_index == want.config.replicate_index
        assert got.events == want.events
    with pytest.raises(ArgParseError):
        read_arg(io.StringIO(buf.getvalue()))  # expects exactly one log


def test_parse_error_reports_line_numbers():
    cfg = SimConfig(n_samples=2, rho=0.0, seed=2)
    buf = io.StringIO()
    write_arg(simulate_backintime(cfg), buf)
    lines = buf.getvalue().splitlines()

    # truncated: no trailer
    with pytest.raises(ArgParseError):
        read_args(io.StringIO("\n".join(lines[:-1]) + "\n"))

    # corrupted checksum
    bad = "\n".join(lines[:-1] + [lines[-1].replace(lines[-1][-5], "0", 1)]) + "\n"
    if bad != "\n".join(lines) + "\n":
        with pytest.raises(ArgParseError):
            read_args(io.StringIO(bad))

    # malformed json mentions its line number
    broken = "\n".join([lines[0], "{not json", *lines[1:]]) + "\n"
    with pytest.raises(ArgParseError) as exc:
        read_args(io.StringIO(broken))
    assert "line 2" in str(exc.value)


def test_parse_rejects_unknown_event_type():
    cfg = SimConfig(n_samples=2, rho=0.0, seed=2)
    buf = io.StringIO()
    write_arg(simulate_backintime(cfg), buf)
    text = buf.getvalue().replace('"type":"coal"', '"type":"merge"')
    with pytest.raises(ArgParseError):
        read_args(io.StringIO(text))


def test_loaded_floats_are_exact():
    cfg = SimConfig(n_samples=3, rho=1.0 / 3.0, seed=77)
    arg = simulate_backintime(cfg)
    buf = io.StringIO()
    write_arg(arg, buf)
    loaded = read_arg(io.StringIO(buf.getvalue()))
    assert loaded.config.rho == cfg.rho
    assert loaded.times == arg.times
