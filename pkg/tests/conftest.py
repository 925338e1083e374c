import math

import pytest

from fdeosc.problem import build_problem

PI = math.pi


def shift_pair_eps(eps=0.01):
    return build_problem({
        "p": "1", "t0": 0, "form": "ConstantShift", "params": {"eps": eps},
        "terms": [
            {"q": "(1+eps)/(4*(1+t^2))", "h": "-7/8", "a0": "(1+eps)/4"},
            {"q": "(1+eps)/(4*(1+t^2))", "h": "2/3", "a0": "(1+eps)/4"},
        ],
    })


def sin_squared_pair():
    return build_problem({
        "p": "1", "t0": 0, "form": "ConstantShift",
        "terms": [
            {"q": "e*sin(t)^2/(1+e^2)", "h": -1, "a0": "e/(1+e^2)"},
            {"q": "1/(4*(1+t^2))", "h": 1, "a0": "1/4"},
        ],
    })


def symmetric_pair():
    return build_problem({
        "p": "1", "t0": 0, "form": "ConstantShift",
        "terms": [
            {"q": "1/(7*(1+t^2))", "h": "-3/2", "a0": "1/7"},
            {"q": "1/(7*(1+t^2))", "h": "3/2", "a0": "1/7"},
        ],
    })


def sign_changing_pair():
    return build_problem({
        "p": "1", "t0": 0, "form": "ConstantShift",
        "terms": [
            {"q": "32*sin(t)", "h": "-1/16", "a0": 32},
            {"q": "32*sin(t)", "h": "1/16", "a0": 32},
        ],
    })


def loglog_delay(lam=1.0):
    return build_problem({
        "p": "1", "t0": 3, "params": {"lambda": lam},
        "terms": [{"q": "lambda/(t*ln(t)*ln(ln(t)))", "alpha": "ln(t)"}],
    })


def single(q, alpha="t", t0=0.0, p="1"):
    return build_problem({"p": p, "t0": t0, "terms": [{"q": q, "alpha": alpha}]})


def segment_endpoints(m):
    """Window and the four interior points used for the sign-changing example."""
    L = (2 * m * PI, (2 * m + 1) * PI)
    t = ((2 * m + 1 / 6) * PI, (2 * m + 1 / 2) * PI - 1 / 16, (2 * m + 1 / 2) * PI + 1 / 16, (2 * m + 1) * PI - PI / 6)
    return {"L": L, "t": t}


@pytest.fixture
def sign_changing():
    return sign_changing_pair()
