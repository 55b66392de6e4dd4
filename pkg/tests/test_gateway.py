import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engram.gateway import GateConfig, Segment, ThalamicGateway
from engram.graph import ActivationMap, GatewayGraphView, MemoryGraph
from engram.model import CHANNELS, SELF_ID, SalienceTag, ValenceVector, ValidationError
from engram.wm import WMItem


def make_gateway(graph: MemoryGraph | None = None,
                 config: GateConfig | None = None) -> tuple[ThalamicGateway, MemoryGraph]:
    graph = graph or MemoryGraph()
    return ThalamicGateway(GatewayGraphView(graph), config or GateConfig()), graph


def seg(text: str, source: str = "user", concepts: tuple = (), turn: int = 1,
        affect: float = 0.0) -> Segment:
    return Segment(text=text, source=source, concept_refs=concepts, turn=turn,
                   affect_hint=affect)


def wm_item(item_id: str, concepts: frozenset = frozenset(),
            tag: SalienceTag = SalienceTag(), kind: str = "segment",
            ref: str = "", persisted: bool = False, entry_turn: int = 0) -> WMItem:
    return WMItem(item_id=item_id, kind=kind, ref=ref or item_id,
                  concept_refs=concepts, tag=tag, activation=1.0,
                  entry_turn=entry_turn, persisted=persisted)


# ------------------------------------------------------------------- tagging

def test_user_source_scores_full_trust():
    gateway, _ = make_gateway()
    tag = gateway.tag(seg("hello there"), [], frozenset())
    assert tag.trust == 1.0


def test_unknown_source_gets_floor_and_flag():
    gateway, _ = make_gateway()
    tag = gateway.tag(seg("hi", source="stranger", turn=7), [], frozenset())
    assert tag.trust == 0.2
    assert gateway.flagged_sources == [(7, "stranger")]


def test_known_unaffective_segment_scores_flat():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    b = graph.add_concept("b", 1)
    view = [wm_item("w1", frozenset({a, b}))]
    tag = gateway.tag(seg("plain words only", concepts=(a, b)), view, frozenset({a, b}))
    assert tag.novelty == 0.0
    assert tag.emotional == 0.0
    assert tag.thematic == 1.0


def test_single_emotional_channel_carries_the_gate():
    gateway, _ = make_gateway()
    tag = gateway.tag(seg("x", source="document", affect=0.9), [], frozenset())
    assert tag.emotional == 0.9
    assert tag.aggregate == pytest.approx(0.9)   # emotional alone clears the gate
    assert tag.aggregate >= GateConfig().channel_threshold


def test_affect_lexicon_scores_emotional_channel():
    gateway, _ = make_gateway()
    tag = gateway.tag(seg("i am devastated and heartbroken today"), [], frozenset())
    assert tag.emotional == pytest.approx(0.6)


def test_urgency_marker_words():
    gateway, _ = make_gateway()
    tag = gateway.tag(seg("deadline is now"), [], frozenset())
    assert tag.urgency == 1.0


def test_novelty_is_fraction_of_unknown_concepts():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    tag = gateway.tag(seg("x", concepts=(a, "c:new")), [], frozenset())
    assert tag.novelty == pytest.approx(0.5)


def test_tag_work_is_linear_in_tokens_and_wm():
    gateway, _ = make_gateway()
    view = [wm_item(f"w{i}") for i in range(10)]
    gateway.tag(seg("one two three"), view, frozenset())
    assert gateway.last_tag_ops == 3 + 10 + 6


def test_tag_is_pure_and_deterministic():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    view = [wm_item("w1", frozenset({a}))]
    s = seg("same words urgent", concepts=(a,))
    assert gateway.tag(s, view, frozenset({a})) == gateway.tag(s, view, frozenset({a}))


# ------------------------------------------------------------------ amplify

def test_emotional_amplify_boosts_present_items():
    gateway, _ = make_gateway()
    view = [wm_item("w1", tag=SalienceTag(emotional=0.2))]
    updates = gateway.emotional_amplify(view, SalienceTag(emotional=0.8))
    assert len(updates) == 1 and updates[0][0] == "w1"
    assert updates[0][1].emotional == pytest.approx(0.6)


def test_emotional_amplify_requires_threshold():
    gateway, _ = make_gateway()
    view = [wm_item("w1", tag=SalienceTag(emotional=0.2))]
    assert gateway.emotional_amplify(view, SalienceTag(emotional=0.5)) == []


def test_emotional_amplify_caps_at_one():
    gateway, _ = make_gateway()
    view = [wm_item("w1", tag=SalienceTag(emotional=0.9))]
    updates = gateway.emotional_amplify(view, SalienceTag(emotional=0.8))
    assert updates[0][1].emotional == 1.0


# ------------------------------------------------------------------- inbound

def _gist(precision: float = 0.8) -> ValenceVector:
    return ValenceVector(valence=0.1, arousal=0.5, density=0.2, precision=precision)


def test_gate_inbound_filters_by_threshold_and_gist():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    b = graph.add_concept("b", 1)
    c = graph.add_concept("c", 1)
    graph.write_gist(a, _gist(), 0.5, ("investigation", "i1"), 1)
    graph.write_gist(b, _gist(), 0.5, ("investigation", "i2"), 1)
    activation = ActivationMap({a: 0.5, b: 0.2, c: 0.9})
    injections = gateway.gate_inbound(activation)
    assert [inj.node_id for inj in injections] == [a]   # b below threshold, c has no gist


def test_gate_inbound_orders_by_activation():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    b = graph.add_concept("b", 1)
    graph.write_gist(a, _gist(), 0.5, ("investigation", "i1"), 1)
    graph.write_gist(b, _gist(), 0.5, ("investigation", "i2"), 1)
    injections = gateway.gate_inbound(ActivationMap({a: 0.4, b: 0.8}))
    assert [inj.node_id for inj in injections] == [b, a]


def test_gate_inbound_empty_map():
    gateway, _ = make_gateway()
    assert gateway.gate_inbound(ActivationMap({})) == []


# ------------------------------------------------------------------ outbound

def test_gate_outbound_promotes_salient_unpersisted():
    gateway, _ = make_gateway()
    view = [
        wm_item("keep", tag=SalienceTag(goal=0.7)),
        wm_item("done", tag=SalienceTag(goal=0.9), persisted=True),
        wm_item("dull", tag=SalienceTag(goal=0.3)),
    ]
    assert gateway.gate_outbound(view) == ["keep"]


def test_gate_outbound_identity_discount():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    gist = ValenceVector(valence=0.0, arousal=0.4, contextual=frozenset({"self"}),
                         density=0.1, precision=1.0)
    graph.write_gist(a, gist, 0.95, ("investigation", "i1"), 1)
    view = [wm_item("near", frozenset({a}), tag=SalienceTag(thematic=0.5))]
    # 0.5 is below the promotion threshold but within the identity discount.
    assert gateway.gate_outbound(view) == ["near"]


# ------------------------------------------------------------------ displace

def test_displace_removes_dead_offtopic_items():
    gateway, graph = make_gateway()
    x = graph.add_concept("x", 1)
    t = graph.add_concept("t", 1)
    view = [wm_item("off", frozenset({x}), tag=SalienceTag(thematic=0.1))]
    assert gateway.displace(view, frozenset({t})) == ["off"]


def test_single_strong_channel_protects_from_displacement():
    gateway, graph = make_gateway()
    x = graph.add_concept("x", 1)
    t = graph.add_concept("t", 1)
    view = [wm_item("emo", frozenset({x}), tag=SalienceTag(emotional=0.9))]
    assert gateway.displace(view, frozenset({t})) == []


def test_identity_gists_never_displaced():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    t = graph.add_concept("t", 1)
    gist = ValenceVector(valence=0.0, arousal=0.1, contextual=frozenset({"self"}),
                         density=0.1, precision=1.0)
    graph.write_gist(a, gist, 0.95, ("investigation", "i1"), 1)
    view = [wm_item("idg", frozenset({a, SELF_ID}), kind="gist", ref=a,
                    tag=SalienceTag(thematic=0.0), persisted=True)]
    assert gateway.displace(view, frozenset({t})) == []


# ------------------------------------------------------------------ boundary

def test_boundary_none_when_concepts_shared():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    view = [wm_item("w", frozenset({a}))]
    assert gateway.detect_boundary({a}, view, 5) is None


def test_boundary_on_fully_novel_concepts():
    gateway, _ = make_gateway()
    boundary = gateway.detect_boundary({"c:new"}, [], 5)
    assert boundary is not None
    assert boundary.surprise == 1.0 and boundary.at_turn == 5


def test_half_shared_is_below_boundary_threshold():
    gateway, graph = make_gateway()
    a = graph.add_concept("a", 1)
    view = [wm_item("w", frozenset({a}))]
    assert gateway.detect_boundary({a, "c:new"}, view, 5) is None


# ----------------------------------------------------------------- properties

@settings(max_examples=500, deadline=None)
@given(st.builds(SalienceTag, **{ch: st.floats(0, 1) for ch in CHANNELS}),
       st.sampled_from(CHANNELS))
def test_channel_independence(tag, boosted):
    """Any single strong channel passes the gates regardless of the others."""
    strong = tag.with_channel(**{boosted: 0.95})
    gateway, graph = make_gateway()
    x = graph.add_concept("x", 1)
    t = graph.add_concept("t", 1)
    item = wm_item("it", frozenset({x}), tag=strong)
    assert gateway.gate_outbound([item]) == ["it"]
    assert gateway.displace([item], frozenset({t})) == []


def test_config_validates_discount():
    with pytest.raises(ValidationError):
        GateConfig(identity_discount=0.7, channel_threshold=0.6)
