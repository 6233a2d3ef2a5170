# tests/test_seglang.py
from types import SimpleNamespace

import numpy as np
import pytest

from skillchain.errors import DslError, EvalError, ParseError
from skillchain.seglang import (Discriminator, FrameContext, Predicate, Vocabulary, eval_discriminator, eval_expr, parse,
                                pretty, typecheck)
from skillchain.seglang.ast import And, BinOp, Compare, Name, Not, Number, Or


@pytest.fixture
def frame():
    return FrameContext(
        keypoints={"p": np.array([0.0, 0.0]), "q": np.array([3.0, 4.0]), "r": np.array([0.0, 2.0])},
        contacts=(SimpleNamespace(a="thumb", b="bulb", force_magnitude=0.5),),
        fingers=frozenset({"thumb", "index"}),
        robot_parts=frozenset({"thumb", "index", "palm"}),
        contact_threshold=0.1,
        rotations={"bulb": 1.25},
        travel={"bulb": 0.02},
        constants={"eps": 0.5, "zero": 0.0},
    )


@pytest.fixture
def vocab():
    return Vocabulary.build({"p", "q", "r"}, {"thumb", "index"}, {"bulb", "socket"}, {"eps": 0.5, "zero": 0.0})


def test_arithmetic_binds_tighter_than_comparison():
    tree = parse("1 + 2 * 3 < 7")
    assert tree == Compare(op="<", left=BinOp(op="+", left=Number(value=1.0),
                                              right=BinOp(op="*", left=Number(value=2.0), right=Number(value=3.0))),
                           right=Number(value=7.0))
    assert pretty(tree) == "((1.0 + (2.0 * 3.0)) < 7.0)"


def test_and_binds_tighter_than_or():
    tree = parse("a || b && c")
    assert tree == Or(left=Name(ident="a"), right=And(left=Name(ident="b"), right=Name(ident="c")))


def test_keyword_and_symbol_spellings_agree():
    assert parse("not true and false or true") == parse("!true && false || true")
    assert isinstance(parse("not true"), Not)


@pytest.mark.parametrize("src", [
    "dist(p, q) <= eps && !contact(thumb, bulb)",
    "-(coord(q, x)) / 2 > 1e-05 || rotation(bulb) >= 0.25",
    "((dist_axis(p, q, y)))<eps",
])
def test_pretty_reparses_to_the_same_tree(src):
    tree = parse(src)
    assert parse(pretty(tree)) == tree


def test_parse_error_reports_position_at_end_of_input():
    with pytest.raises(ParseError) as info:
        parse("dist(p, q) <")
    assert info.value.line == 1
    assert info.value.column == 13
    assert "scalar" in str(info.value)


def test_parse_error_reports_line_and_column_of_bad_character():
    with pytest.raises(ParseError) as info:
        parse("dist(p, q) <\n  $")
    assert (info.value.line, info.value.column) == (2, 3)


def test_empty_expression_is_a_parse_error():
    with pytest.raises(ParseError):
        parse("   ")


def test_typecheck_accepts_well_formed_predicate(vocab):
    assert typecheck(parse("dist(p, q) <= eps && contact(thumb, bulb)"), vocab, "predicate") == []


def test_typecheck_suggests_close_keypoint(vocab):
    diags = typecheck(parse("dist(pp, q) < eps"), vocab, "predicate")
    assert len(diags) == 1
    assert "unknown keypoint 'pp'" in diags[0].message
    assert diags[0].line == 1


def test_typecheck_unknown_function_and_constant(vocab):
    messages = [d.message for d in typecheck(parse("distance(p, q) < epsilon"), vocab)]
    assert any("unknown function 'distance'" in m for m in messages)
    assert any("unknown constant 'epsilon'" in m for m in messages)


def test_typecheck_role_restrictions(vocab):
    assert typecheck(parse("contact(thumb, bulb)"), vocab, "point")
    assert typecheck(parse("dist(p, q) < 1"), vocab, "contact")
    assert typecheck(parse("contact(thumb, bulb) && any_contact(socket)"), vocab, "contact") == []


def test_typecheck_rejects_scalar_top_level(vocab):
    diags = typecheck(parse("dist(p, q)"), vocab, "predicate")
    assert any("must be boolean" in d.message for d in diags)


def test_typecheck_wrong_arity(vocab):
    diags = typecheck(parse("coord(q) > 0"), vocab)
    assert any("takes 2 argument(s), got 1" in d.message for d in diags)


def test_scalar_atoms(frame):
    assert eval_expr(parse("dist(p, q)"), frame) == pytest.approx(5.0)
    assert eval_expr(parse("dist_axis(p, q, y)"), frame) == pytest.approx(4.0)
    assert eval_expr(parse("coord(q, x)"), frame) == pytest.approx(3.0)
    assert eval_expr(parse("angle_between(q, p, r)"), frame) == pytest.approx(np.arccos(0.8))
    assert eval_expr(parse("rotation(bulb)"), frame) == pytest.approx(1.25)
    assert eval_expr(parse("travel(bulb)"), frame) == pytest.approx(0.02)


def test_contact_respects_threshold(frame):
    assert eval_expr(parse("contact(thumb, bulb)"), frame) is True
    assert eval_expr(parse("contact(index, bulb)"), frame) is False
    assert eval_expr(parse("any_contact(bulb)"), frame) is True
    assert eval_expr(parse("contact(thumb, bulb)"), frame.with_threshold(1.0)) is False


def test_comparisons_are_closed_where_written(frame):
    assert eval_expr(parse("dist(p, q) <= 5"), frame) is True
    assert eval_expr(parse("dist(p, q) < 5"), frame) is False
    assert eval_expr(parse("eps * 10 >= dist(p, q)"), frame) is True


def test_constants_and_unbound_names(frame):
    assert eval_expr(parse("eps + 1"), frame) == pytest.approx(1.5)
    with pytest.raises(DslError, match="not bound"):
        eval_expr(parse("missing > 0"), frame)


def test_division_by_zero_names_the_subexpression(frame):
    with pytest.raises(EvalError) as info:
        eval_expr(parse("dist(p, q) / zero > 1"), frame)
    assert "division by zero" in str(info.value)
    assert info.value.subexpression == "(dist(p, q) / zero)"


def test_typecheck_flags_literal_zero_divisor(vocab):
    assert any("division by literal zero" in d.message for d in typecheck(parse("eps / 0 > 1"), vocab))


def test_discriminator_compile_raises_on_bad_vocabulary(vocab):
    with pytest.raises(DslError, match="skill 2 point constraint"):
        Discriminator.compile(2, "dist(p, nowhere) < eps", "true", vocab)


def test_discriminator_digest_ignores_whitespace(vocab):
    a = Discriminator.compile(1, "dist(p,q)<eps", "contact(thumb,bulb)", vocab)
    b = Discriminator.compile(1, "dist(p, q) < eps", "contact( thumb , bulb )", vocab)
    c = Discriminator.compile(1, "dist(p, q) <= eps", "contact(thumb, bulb)", vocab)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_point_only_discriminator_ignores_contacts(frame, vocab):
    bare = Discriminator.compile(1, "dist(p, q) > eps", vocab=vocab)
    blocked = Discriminator.compile(1, "dist(p, q) > eps", "!contact(thumb, bulb)", vocab)
    assert bare.contact_expr is None
    assert eval_discriminator(bare, frame) is True
    assert eval_discriminator(blocked, frame) is False
    assert bare.digest() != blocked.digest()
    assert bare.diagnostics(vocab) == []


def test_predicate_is_callable_on_a_frame(frame, vocab):
    pred = Predicate.compile("dist(p, q) > eps && contact(thumb, bulb)", vocab)
    assert pred(frame) is True


def test_bundled_task_expressions_typecheck(bulb_task):
    for d in bulb_task.discriminators:
        assert d.diagnostics(bulb_task.vocabulary) == []
    assert typecheck(parse("dist(bulb_center, socket_center) <= eps_pos"), bulb_task.vocabulary) == []
