import pytest

from d2dmac.model import (Flow, Link, LinkKind, Schedule, ScheduledLink, Stage, UnavailableLinkError,
                          are_adjacent, hop_weight, node_count, path_links, validate_schedule)


def L(a, b, c=1):
    return Link(a, b, c, LinkKind.ACCESS)


@pytest.mark.parametrize("d,c,w", [(5, 2, 3), (6, 2, 3), (7, 3, 3), (8, 3, 3), (0, 1, 0), (1, 3, 1)])
def test_hop_weight_is_ceiling(d, c, w):
    assert hop_weight(d, c) == w


def test_hop_weight_rejects_blocked_link():
    with pytest.raises(UnavailableLinkError):
        hop_weight(3, 0)


def test_link_validation():
    with pytest.raises(ValueError):
        Link(1, 1, 2)
    with pytest.raises(ValueError):
        Link(1, 2, -1)
    assert not Link(1, 2, 0).available


def test_flow_path_must_chain():
    with pytest.raises(ValueError):
        Flow(1, 0, 3, (L(0, 1), L(2, 3)))


def test_flow_hop_count_and_availability():
    f = Flow(1, 0, 2, (L(0, 1), L(1, 2)), Link(0, 2, 0), 4)
    assert f.hop_count == 2 and f.has_ordinary and not f.has_direct
    g = Flow(2, 0, 2, (), Link(0, 2, 2), 4)
    assert g.hop_count == 1 and not g.has_ordinary and g.has_direct


def test_adjacency_is_shared_endpoint():
    assert are_adjacent(L(1, 2), L(2, 3))
    assert are_adjacent(L(1, 2), L(3, 1))
    assert not are_adjacent(L(1, 2), L(3, 4))


def test_node_count_and_path_links():
    f = Flow(1, 0, 2, (L(0, 1), L(1, 2)), Link(0, 2, 1), 1)
    assert node_count([f]) == 3
    assert [sl.hop for sl in path_links(f, False)] == [0, 1]
    assert path_links(f, True)[0].hop is None


def _two_hop():
    f = Flow(1, 0, 2, (L(0, 1, 2), L(1, 2, 1)), Link(0, 2, 1), 4)
    a, b = path_links(f, False)
    return f, a, b


def test_validate_accepts_correct_schedule():
    f, a, b = _two_hop()
    assert validate_schedule(Schedule((Stage((a,), 2), Stage((b,), 4))), [f], n=3).ok


@pytest.mark.parametrize("stages,kind", [
    (lambda a, b: [Stage((a,), 2), Stage((b,), 3)], "demand"),
    (lambda a, b: [Stage((b,), 4), Stage((a,), 2)], "ordering"),
    (lambda a, b: [Stage((a, b), 4)], "same_path"),
    (lambda a, b: [Stage((a,), 2), Stage((a,), 2), Stage((b,), 4)], "activation"),
    (lambda a, b: [Stage((a,), 2)], "demand"),
])
def test_validate_reports_violation_kind(stages, kind):
    f, a, b = _two_hop()
    report = validate_schedule(Schedule(tuple(stages(a, b))), [f], n=3)
    assert kind in report.kinds()


def test_validate_adjacency_and_stage_size():
    f1 = Flow(1, 0, 1, (), L(0, 1), 1)
    f2 = Flow(2, 1, 2, (), L(1, 2), 1)
    s = Schedule((Stage((path_links(f1, True)[0], path_links(f2, True)[0]), 1),))
    report = validate_schedule(s, [f1, f2], n=3)
    assert {"adjacency", "stage_size"} <= report.kinds()


def test_validate_mixed_path_and_unknown_link():
    f, a, b = _two_hop()
    d = path_links(f, True)[0]
    s = Schedule((Stage((a,), 4), Stage((b,), 4), Stage((d,), 4)))
    assert "mixed_path" in validate_schedule(s, [f]).kinds()
    bogus = ScheduledLink(1, 0, L(5, 6))
    assert "unknown" in validate_schedule(Schedule((Stage((bogus,), 4),)), [f]).kinds()


def test_schedule_dump_format():
    f, a, b = _two_hop()
    text = Schedule((Stage((a,), 2), Stage((b,), 4))).dump({0: "S", 1: "AP", 2: "D"})
    assert text.splitlines() == ["stage 1 delta=2 f1/1:S->AP", "stage 2 delta=4 f1/2:AP->D", "total=6"]
