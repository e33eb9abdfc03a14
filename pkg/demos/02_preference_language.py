"""The preference language: chains, signs, full rankings, and compilation.

Preferences arrive as short text statements. They are parsed into a small
program, validated against the task's feature names, and compiled into a full
target ranking by merging partial orders with the reference ranking as the
tie-breaking prior.

Run:  python3 demos/02_preference_language.py
"""

import numpy as np

from exagree.attribution import Ranking
from exagree.elicitation import (
    PreferenceError,
    StubLlmClient,
    compile_target,
    llm_elicit,
    parse_preferences,
    render_program,
)

NAMES = ["age", "income", "debt", "tenure", "region"]
REFERENCE = Ranking(ranks=np.array([1, 2, 3, 4, 5]))  # current model's view


def show(text: str) -> None:
    print(f"text: {text!r}")
    try:
        prog = parse_preferences(text, NAMES)
        target = compile_target(prog, REFERENCE, NAMES)
        order = [NAMES[i] for i in target.target_ranking.order()]
        print(f"  parsed     : {render_program(prog)!r}")
        print(f"  compiled   : {' > '.join(order)}")
        if target.target_signs is not None:
            signs = {n: int(s) for n, s in zip(NAMES, target.target_signs) if s}
            print(f"  signs      : {signs}")
    except PreferenceError as exc:
        print(f"  rejected   : {exc}")
    print()


# A chain pulls features above others; unmentioned features keep their
# reference order around them.
show("debt > age")

# Signs constrain attribution direction without touching the order.
show("debt > age\nsign(income) = -")

# A full ranking statement wins over any chains.
show("rank: region, debt, income, age, tenure")

# Typos get a suggestion, not a silent guess.
show("incom > age")

# Contradictions are rejected at parse time ...
show("sign(age) = +\nsign(age) = -")

# ... and cyclic orderings at compile time.
show("age > income\nincome > age")

# The same text can be routed through an elicitation client; its output is
# re-validated exactly like user text before it is trusted.
prog = llm_elicit("income > age; sign(debt) = -", NAMES, StubLlmClient())
print(f"via stub client: {render_program(prog)!r}")
