import numpy as np
import pytest

from cliffpi.expr import ExpressionError, blade_index, compile_expression, multivector_field


def test_evaluates_whitelisted_grammar():
    f = compile_expression("2*x0 - x1**2 / 4 + exp(-x2) * pi", 3)
    p = np.array([[1.0, 2.0, 0.0]])
    assert f(p)[0] == pytest.approx(2 - 1 + np.pi)
    assert compile_expression("3", 2)(np.zeros((4, 2))).tolist() == [3.0] * 4


@pytest.mark.parametrize("text", [
    "__import__('os')", "x0.real", "x5", "sin(x0)", "x0 ** x1", "[x0]", "x0 if x1 else 2",
    "lambda: 1", "x0 % 2", "'a'", "exp(x0, x1)", "x0 +",
])
def test_rejects_everything_else(text):
    with pytest.raises(ExpressionError):
        compile_expression(text, 3)


def test_multivector_field_and_blades():
    assert blade_index("e0", 2) == 0 and blade_index("e12", 2) == 3 and blade_index("e2", 2) == 2
    for bad in ("e21", "e3", "x1", "e11"):
        with pytest.raises(ExpressionError):
            blade_index(bad, 2)
    f = multivector_field({"e0": "x0", "e12": "1"}, 2)
    out = f(np.array([[0.5, 0.0, 0.0]]))
    assert out.tolist() == [[0.5, 0.0, 0.0, 1.0]]
    with pytest.raises(ExpressionError):
        multivector_field(["1", "2"], 2)
