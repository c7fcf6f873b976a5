import json
import math
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import edaflow
from edaflow.codebleu import (
    STAGE_WEIGHTS,
    CodeBleuWeights,
    DataFlowGraph,
    DfgNode,
    EdaCommandDb,
    corpus_syntax_match,
    dataflow_match,
    default_db,
    detect_stage,
    evaluate,
    extract_dfg,
    ngram_match,
    report_from_components,
    syntax_match,
    tokenize,
    weighted_ngram_match,
)
from edaflow.codebleu.tokenizer import COMMAND, OPERATOR, VARIABLE, strip_comments
from edaflow.errors import UnterminatedBrace, UnterminatedString

GOLDEN = Path(edaflow.__file__).parent / "data" / "golden"

# -- tokenizer -------------------------------------------------------------------


def test_tokenize_drops_trailing_comment():
    assert tokenize("set x 5 ;# note").texts() == ["set", "x", "5"]


def test_tokenize_compile_line():
    s = tokenize("compile -map_effort $MAP_EFFORT")
    assert s.texts() == ["compile", "-map_effort", "$MAP_EFFORT"]
    assert s.kinds() == [COMMAND, OPERATOR, VARIABLE]


def test_tokenize_comment_only():
    assert len(tokenize("# one\n\n   # two\n")) == 0


def test_hash_inside_braces_is_not_a_comment():
    s = tokenize('puts {# not a comment}\nset a "x # y"')
    assert s.texts() == ["puts", "{# not a comment}", "set", "a", '"x # y"']


def test_line_continuation_joins_command():
    s = tokenize("set b \\\n  $a")
    assert [t.command for t in s] == [0, 0, 0]
    assert [t.line for t in s] == [0, 0, 1]


def test_unterminated_constructs_report_line():
    with pytest.raises(UnterminatedBrace) as ei:
        tokenize("set a 1\nset b {x\n")
    assert ei.value.line == 2
    with pytest.raises(UnterminatedString) as ei:
        tokenize('set a 1\n\nputs "oops\n')
    assert ei.value.line == 3
    # lenient mode keeps going for scoring
    assert tokenize("set b {x\n", strict=False).texts()[:2] == ["set", "b"]


LINES = [
    "set a 1", "set b $a", 'set c "$a/$b"', "set d [expr {$a + 1}]", "# a comment", "", "   ",
    "placeDesign", "compile -map_effort $MAP_EFFORT ;# trailing", "proc f {x} {\n  return $x\n}",
    "if {$a > 0} {\n  set e 1\n} else {\n  set e 2\n}", "foreach i {1 2 3} { puts $i }",
    "set f \\\n  $b", "puts {# braces keep #}", "set g 1; set h 2", 'puts "x # y"',
]


@settings(max_examples=150)
@given(st.lists(st.sampled_from(LINES), max_size=12), st.sampled_from(["\n", "\n\n", "\n  \t"]))
def test_tokens_reconstruct_stripped_source(lines, sep):
    script = sep.join(lines)
    s = tokenize(script)
    assert s.source == strip_comments(script)
    pos = 0
    for t in s:
        assert s.source[t.offset:t.offset + len(t.text)] == t.text
        gap = s.source[pos:t.offset]
        assert gap.replace("\\\n", "").replace(";", "").strip() == ""
        pos = t.offset + len(t.text)
    assert s.source[pos:].replace(";", "").strip() == ""
    # comment and blank lines carry no tokens
    raw_lines = script.split("\n")
    for t in s:
        first = raw_lines[t.line].strip()
        assert first and not first.startswith("#")


# -- n-gram components ----------------------------------------------------------

def _hand_bleu(precisions, bp=1.0):
    return 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / len(precisions))


def test_ngram_one_token_of_twenty_changed():
    ref = [f"w{i}" for i in range(20)]
    cand = list(ref)
    cand[10] = "other"
    score = ngram_match(" ".join(ref), " ".join(cand))
    # a middle token sits in n of the 21-n n-grams of each order
    expected = _hand_bleu([19 / 20, 17 / 19, 15 / 18, 13 / 17])
    assert score == pytest.approx(expected, abs=1e-12)


def test_ngram_clipping_and_brevity():
    # candidate repeats a reference word: clipped to the reference count
    assert ngram_match("a b c d", "a a a a", max_n=1) == pytest.approx(25.0)
    # shorter candidate pays the brevity penalty
    assert ngram_match("a b c d", "a b", max_n=2) == pytest.approx(100 * math.exp(1 - 4 / 2))


def test_ngram_trivial_cases():
    s = "set a 1\nplaceDesign -opt 3\nrouteDesign"
    assert ngram_match(s, s) == 100.0
    assert ngram_match("alpha beta gamma", "delta epsilon zeta") == 0.0
    assert ngram_match(s, "") == 0.0
    with pytest.raises(ValueError):
        ngram_match(s, s, max_n=0)


WEIGHT_REF = """placeDesign
refinePlace
optDesign -preCTS
setPlaceMode -place_global_timing_effort high -place_global_cong_effort low
setOptMode -fixFanoutLoad true -effort medium
"""
WEIGHT_CAND = """placeDesign
refinePlace
optDesign -preCTS
setPlaceMode -place_global_timing_effort low -place_global_cong_effort high
setOptMode -fixFanoutLoad medium -effort true
"""


def test_weighted_beats_plain_when_commands_kept():
    plain = ngram_match(WEIGHT_REF, WEIGHT_CAND)
    weighted = weighted_ngram_match(WEIGHT_REF, WEIGHT_CAND)
    assert 0 < plain < weighted < 100


def test_weighted_direct_count_oracle():
    db = default_db()
    ref, cand = tokenize(WEIGHT_REF).words(), tokenize(WEIGHT_CAND).words()

    def w(gram):
        return max(4.0 if (t in db or t in {"set", "proc", "if", "foreach", "while"}) else 1.0 for t in gram)

    precisions = []
    for n in range(1, 5):
        grams = [tuple(cand[i:i + n]) for i in range(len(cand) - n + 1)]
        pool = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
        num = den = 0.0
        for g in grams:
            den += w(g)
            if g in pool:
                pool.remove(g)
                num += w(g)
        precisions.append(num / den)
    assert weighted_ngram_match(WEIGHT_REF, WEIGHT_CAND) == pytest.approx(_hand_bleu(precisions), abs=1e-9)


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["set", "x", "placeDesign", "1", "$a", "routeDesign", "foo", "-opt"]),
                min_size=1, max_size=15),
       st.lists(st.sampled_from(["set", "x", "placeDesign", "1", "$a", "bar", "-opt"]), min_size=1, max_size=15),
       st.sampled_from([0.5, 2.0, 4.0, 10.0]))
def test_weighted_degeneracies(ref, cand, lam):
    r, c = " ".join(ref), " ".join(cand)
    assert weighted_ngram_match(r, c, lam=1) == ngram_match(r, c)
    assert weighted_ngram_match(r, r, lam=lam) == pytest.approx(100.0)


def test_disjoint_vocabularies_score_zero():
    assert weighted_ngram_match("placeDesign x", "routeDesign y") == 0.0


# -- syntax and dataflow --------------------------------------------------------

def test_syntax_examples():
    ten = "\n".join(f"set v{i} {i}" for i in range(10))
    assert syntax_match(ten, ten) == 100.0
    ref = "set a 1\nset b 2\nplaceDesign\nrouteDesign"
    assert syntax_match(ref, "set a 1\nplaceDesign\nrouteDesign") == 75.0
    noisy = "# header\n\nset a 1\n   set b 2   ;# why\n\nplaceDesign\n# x\nrouteDesign\n"
    assert syntax_match(ref, noisy) == 100.0
    assert syntax_match("# only comments", "set a 1") == 0.0
    assert evaluate("# only comments", "set a 1", stage="route").flags[0] == "empty-reference-lines"


def test_corpus_syntax_match_pools_lines():
    pairs = [("a\nb", "a\nb"), ("c\nd\ne\nf", "c")]
    assert corpus_syntax_match(pairs) == pytest.approx(100 * 3 / 6)


def _graph(*edges):
    return DataFlowGraph(tuple(DfgNode(n, i, r, s, ()) for i, (n, r, s) in enumerate(edges)))


def test_dataflow_examples():
    five = [("a", "computedFrom", ()), ("b", "computedFrom", ("a",)), ("placeDesign", "comesFrom", ()),
            ("c", "computedFrom", ("a", "b")), ("routeDesign", "comesFrom", ())]
    g = _graph(*five)
    assert dataflow_match(g, g) == 100.0
    assert dataflow_match(g, _graph(*five[:4])) == 80.0
    assert dataflow_match(_graph(), _graph()) == 100.0
    assert dataflow_match(_graph(), g) == 0.0
    renamed = extract_dfg("set x 5\nset y $x")
    original = extract_dfg("set z 5\nset y $z")
    assert dataflow_match(original, renamed) < 100.0


def _oracle_lines(script):
    out = []
    for raw in script.split("\n"):
        s = raw.strip()
        if s.startswith("#"):
            continue
        if ";#" in s:
            s = s.split(";#", 1)[0].rstrip()
        if s:
            out.append(s)
    return out


def syntax_oracle(ref, cand):
    ref_lines = _oracle_lines(ref)
    if not ref_lines:
        return 0.0
    unused = list(ref_lines)
    hits = 0
    for line in _oracle_lines(cand):
        if line in unused:
            unused.remove(line)
            hits += 1
    return 100.0 * hits / len(ref_lines)


def dataflow_oracle(ref_graph, cand_graph):
    ref = [(n.name, n.relation, tuple(sorted(n.source_names))) for n in ref_graph.nodes]
    pool = [(n.name, n.relation, tuple(sorted(n.source_names))) for n in cand_graph.nodes]
    if not ref:
        return 100.0 if not pool else 0.0
    hits = 0
    for e in ref:
        if e in pool:
            pool.remove(e)
            hits += 1
    return 100.0 * hits / len(ref)


CORPUS_LINES = [
    "set a 1", "set b $a", "set c [expr {$a + $b}]", "set a 2", "set d $c", "set TOP_NAME \"b14\"",
    "compile -map_effort $MAP_EFFORT", "placeDesign", "refinePlace", "routeDesign", "ccopt_design",
    "incr a", "lappend l $b", "append s $a", "# comment line", "", "   set a 1   ", "set b $a ;# same as above",
    "analyze -format verilog $files", "elaborate $TOP_NAME", "set env(x) $d", "puts $c",
]


def script_pairs(n=60, seed=7):
    rnd = random.Random(seed)
    pairs = []
    for _ in range(n):
        ref = [rnd.choice(CORPUS_LINES) for _ in range(rnd.randint(0, 15))]
        cand = [rnd.choice(ref + CORPUS_LINES) if ref and rnd.random() < 0.6 else rnd.choice(CORPUS_LINES)
                for _ in range(rnd.randint(0, 15))]
        pairs.append(("\n".join(ref), "\n".join(cand)))
    return pairs


def test_syntax_and_dataflow_match_brute_force_oracles():
    pairs = script_pairs()
    assert len(pairs) >= 50
    for ref, cand in pairs:
        assert syntax_match(ref, cand) == syntax_oracle(ref, cand)
        rg, cg = extract_dfg(ref), extract_dfg(cand)
        assert dataflow_match(rg, cg) == dataflow_oracle(rg, cg)


# -- DFG extraction -------------------------------------------------------------

C, F = "computedFrom", "comesFrom"

DFG_ANNOTATIONS = {
    "set x 5": [("x", 0, C, (), ())],
    "set x 5\nset y $x": [("x", 0, C, (), ()), ("y", 1, C, ("x",), (0,))],
    'set a 1\nset b $a\nset c "$a$b"': [("a", 0, C, (), ()), ("b", 1, C, ("a",), (0,)),
                                       ("c", 2, C, ("a", "b"), (0, 1))],
    "set x 1\nset x [expr {$x + 1}]\nset y $x": [("x", 0, C, (), ()), ("x", 1, C, ("x",), (0,)),
                                                 ("y", 2, C, ("x",), (1,))],
    "set y $z": [("y", 0, C, ("z",), ())],
    "set dir /tmp\nset f ${dir}/a.v": [("dir", 0, C, (), ()), ("f", 1, C, ("dir",), (0,))],
    "set x 1\nset y {$x}": [("x", 0, C, (), ()), ("y", 1, C, (), ())],
    "set a 2\nset b [expr $a * 3]": [("a", 0, C, (), ()), ("b", 1, C, ("a",), (0,))],
    "set i 0\nincr i": [("i", 0, C, (), ()), ("i", 1, C, ("i",), (0,))],
    "set i 0\nset s 2\nincr i $s": [("i", 0, C, (), ()), ("s", 1, C, (), ()), ("i", 2, C, ("i", "s"), (0, 1))],
    "set s a\nappend s $s b": [("s", 0, C, (), ()), ("s", 1, C, ("s",), (0,))],
    "set l {}\nlappend l x": [("l", 0, C, (), ()), ("l", 1, C, ("l",), (0,))],
    "set clk(name) core\nset n $clk(name)": [("clk(name)", 0, C, (), ()), ("n", 1, C, ("clk(name)",), (0,))],
    "set k 1\nset v $arr($k)": [("k", 0, C, (), ()), ("v", 1, C, ("arr",), ())],
    "set env(place_global_timing_effort) high": [("env(place_global_timing_effort)", 0, C, (), ())],
    "set eff high\nset env(place_global_timing_effort) $eff": [
        ("eff", 0, C, (), ()), ("env(place_global_timing_effort)", 1, C, ("eff",), (0,))],
    "proc build {top} {\n  set out $top\n  compile\n}": [("out", 0, C, ("top",), ()), ("compile", 1, F, (), ())],
    "proc f {} {placeDesign}\nf": [("placeDesign", 0, F, (), ())],
    'set e high\nif {$e == "high"} {\n  set m 1\n} else {\n  set m 0\n}': [
        ("e", 0, C, (), ()), ("m", 1, C, (), ()), ("m", 2, C, (), ())],
    "if {$a} {set x 1} elseif {$b} {set x 2} else {set x 3}": [
        ("x", 0, C, (), ()), ("x", 1, C, (), ()), ("x", 2, C, (), ())],
    "set ds {a b}\nforeach d $ds {\n  set r $d\n}": [
        ("ds", 0, C, (), ()), ("d", 1, C, ("ds",), (0,)), ("r", 2, C, ("d",), (1,))],
    "for {set i 0} {$i < 3} {incr i} {\n  set y $i\n}": [
        ("i", 0, C, (), ()), ("y", 1, C, ("i",), (0,)), ("i", 2, C, ("i",), (0,))],
    "set n 3\nwhile {$n > 0} {\n  incr n -1\n}": [("n", 0, C, (), ()), ("n", 1, C, ("n",), (0,))],
    "catch {routeDesign} err": [("routeDesign", 0, F, (), ())],
    "placeDesign": [("placeDesign", 0, F, (), ())],
    "analyze -format verilog $files\nelaborate $top\ncompile -map_effort $e": [
        ("analyze", 0, F, (), ()), ("elaborate", 1, F, (), ()), ("compile", 2, F, (), ())],
    "floorPlan -r 1.0 0.7 10 10 10 10\neditPin -side Top\nplaceDesign\nrefinePlace": [
        ("floorPlan", 0, F, (), ()), ("editPin", 1, F, (), ()), ("placeDesign", 2, F, (), ()),
        ("refinePlace", 3, F, (), ())],
    "create_clock_tree_spec -file spec.ctstch\nccopt_design": [
        ("create_clock_tree_spec", 0, F, (), ()), ("ccopt_design", 1, F, (), ())],
    "routeDesign\ncheckRoute\nsaveDesign out.enc": [
        ("routeDesign", 0, F, (), ()), ("checkRoute", 1, F, (), ()), ("saveDesign", 2, F, (), ())],
    "set top b14\nset n [get_object_name [current_design $top]]": [
        ("top", 0, C, (), ()), ("current_design", 1, F, (), ()), ("n", 2, C, ("top",), (0,))],
    "set rpt [report_timing]": [("report_timing", 0, F, (), ()), ("rpt", 1, C, (), ())],
    "set a 1\nset b \\\n  $a": [("a", 0, C, (), ()), ("b", 1, C, ("a",), (0,))],
    "set a 1; set b $a": [("a", 0, C, (), ()), ("b", 1, C, ("a",), (0,))],
    "# set a 1\nset b 2 ;# set c 3": [("b", 0, C, (), ())],
    "puts $x": [],
    "set a 1\nset b 2\nset c [expr {$a + $b + $a}]": [
        ("a", 0, C, (), ()), ("b", 1, C, (), ()), ("c", 2, C, ("a", "b"), (0, 1))],
}


def test_annotation_corpus_covers_core_commands():
    assert len(DFG_ANNOTATIONS) >= 30
    named = {"analyze", "elaborate", "compile", "floorPlan", "editPin", "placeDesign", "ccopt_design",
             "create_clock_tree_spec", "routeDesign", "checkRoute", "saveDesign"}
    seen = {n[0] for nodes in DFG_ANNOTATIONS.values() for n in nodes if n[2] == F}
    assert named <= seen


@pytest.mark.parametrize("snippet", list(DFG_ANNOTATIONS))
def test_dfg_annotations(snippet):
    g = extract_dfg(snippet)
    assert [tuple(n) for n in g.nodes] == DFG_ANNOTATIONS[snippet]
    assert g.diagnostics == 0


def test_dfg_malformed_counts_diagnostic():
    g = extract_dfg("if {$x}\nset a 1")
    assert g.diagnostics == 1
    assert [n.name for n in g.nodes] == ["a"]


@settings(max_examples=100)
@given(st.lists(st.sampled_from(CORPUS_LINES + LINES), max_size=15))
def test_dfg_structural_invariants(lines):
    script = "\n".join(lines)
    g = extract_dfg(script)
    db = default_db()
    for pos, n in enumerate(g.nodes):
        assert n.idx == pos
        assert all(i < n.idx for i in n.source_indices)
        for i in n.source_indices:
            assert g.nodes[i].name in n.source_names
        if n.relation == F:
            assert n.name in db and n.source_names == ()
    # stable under re-tokenisation
    assert extract_dfg(tokenize(script, strict=False)).nodes == g.nodes


# -- command database and stage detection ---------------------------------------

def test_command_db_contents():
    db = default_db()
    assert {db.category(c) for c in db.entries} == {"synthesis", "placement", "cts", "route"}
    for c in ("analyze", "elaborate", "compile"):
        assert db.category(c) == "synthesis"
    for c in ("floorPlan", "editPin", "placeDesign"):
        assert db.category(c) == "placement"
    for c in ("ccopt_design", "create_clock_tree_spec"):
        assert db.category(c) == "cts"
    for c in ("routeDesign", "checkRoute"):
        assert db.category(c) == "route"
    assert "saveDesign" in db
    assert db.total_count == len(db.entries) > 200


def test_command_db_from_file(tmp_path):
    path = tmp_path / "db.json"
    path.write_text(json.dumps({"version": "9", "commands": {"myCmd": "route"}}))
    db = EdaCommandDb.from_file(path)
    assert db.category("myCmd") == "route" and db.version == "9"


def test_detect_stage_examples():
    assert detect_stage("create_clock_tree_spec -file x\nccopt_design") == ("cts", 1.0)
    assert detect_stage("analyze -f v a.v\nelaborate top\ncompile") == ("synthesis", 1.0)
    assert detect_stage("puts hello") == ("synthesis", 0.0)
    assert detect_stage("") == ("synthesis", 0.0)
    assert detect_stage("", fallback="route") == ("route", 0.0)


def test_detect_stage_threshold():
    mixed = "compile\nplaceDesign\nccopt_design\nrouteDesign\ncompile"
    assert detect_stage(mixed) == ("synthesis", 0.4)
    assert detect_stage(mixed, threshold=0.5) == ("synthesis", 0.0)


@pytest.mark.parametrize("stage", ["synthesis", "placement", "cts", "route"])
def test_golden_scripts_detect_their_stage(stage):
    got, confidence = detect_stage((GOLDEN / f"{stage}.tcl").read_text())
    assert got == stage and confidence >= 0.8


# -- combination ----------------------------------------------------------------

def test_weights_table():
    expect = {"synthesis": (0.20, 0.30, 0.25, 0.25), "placement": (0.15, 0.25, 0.30, 0.30),
              "cts": (0.20, 0.25, 0.30, 0.25), "route": (0.20, 0.25, 0.25, 0.30)}
    for stage, w in STAGE_WEIGHTS.items():
        assert w.as_tuple() == expect[stage]
        assert abs(math.fsum(w.as_tuple()) - 1.0) <= 1e-12
    with pytest.raises(ValueError):
        CodeBleuWeights(0.5, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        CodeBleuWeights(-0.1, 0.5, 0.3, 0.3)


def test_synthesis_recombination():
    r = report_from_components("synthesis", 24.806, 89.04, 96.79, 97.30)
    assert r.total == pytest.approx(80.19, abs=0.01)
    assert report_from_components("cts", 0, 0, 0, 0).total == 0


@settings(max_examples=200)
@given(st.sampled_from(sorted(STAGE_WEIGHTS)), st.lists(st.floats(0, 100), min_size=4, max_size=4))
def test_total_is_dot_product(stage, comps):
    r = report_from_components(stage, *comps)
    assert abs(r.total - sum(w * c for w, c in zip(STAGE_WEIGHTS[stage].as_tuple(), comps))) <= 1e-9


@pytest.mark.parametrize("stage", ["synthesis", "placement", "cts", "route"])
def test_self_match_every_golden_script(stage):
    text = (GOLDEN / f"{stage}.tcl").read_text()
    for s in STAGE_WEIGHTS:
        r = evaluate(text, text, stage=s)
        assert r.components == {"ngram": 100.0, "weighted_ngram": 100.0, "syntax": 100.0, "dataflow": 100.0}
        assert abs(r.total - 100.0) <= 1e-9


def test_comment_only_changes_score_100():
    ref = (GOLDEN / "route.tcl").read_text()
    cand = (GOLDEN / "route_candidate.tcl").read_text()
    assert ref != cand
    assert evaluate(ref, cand).total == pytest.approx(100.0, abs=1e-9)


def test_stored_synthesis_report_regression():
    ref = (GOLDEN / "synthesis.tcl").read_text()
    cand = (GOLDEN / "synthesis_candidate.tcl").read_text()
    stored = json.loads((GOLDEN / "synthesis_report.json").read_text())
    got = evaluate(ref, cand).to_dict()
    assert got["stage_detected"]["stage"] == stored["stage_detected"]["stage"] == "synthesis"
    for k, v in stored["components"].items():
        assert got["components"][k] == pytest.approx(v, abs=1e-9)
    assert got["total"] == pytest.approx(stored["total"], abs=1e-9)


def test_report_json_shape():
    d = evaluate("placeDesign", "placeDesign").to_dict()
    assert set(d) == {"stage_detected", "components", "total", "weights", "flags"}
    assert set(d["components"]) == {"ngram", "weighted_ngram", "syntax", "dataflow"}
    assert d["stage_detected"] == {"stage": "placement", "confidence": 1.0}
    with pytest.raises(ValueError):
        evaluate("a", "a", stage="floorplan")
