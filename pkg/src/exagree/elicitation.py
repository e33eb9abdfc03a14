"""Preference elicitation: a deterministic DSL plus a pluggable NL backend.

Grammar (statements separated by newlines or semicolons):

    chain ::= NAME (">" NAME)+          # strict descending importance
    sign  ::= "sign(" NAME ")" "=" ("+" | "-")
    rank  ::= "rank:" NAME ("," NAME)*  # explicit ordering, wins over chains

Feature names match case-insensitively against the dataset; unknown names
fail with a nearest-name suggestion. The natural-language path goes through
a client object whose output is re-validated by the same resolver, so an
external backend can never smuggle in an invalid program.
"""

from __future__ import annotations

import difflib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .attribution import Ranking
from .saem import StakeholderTarget

__all__ = [
    "PreferenceError",
    "RankChain",
    "SignDecl",
    "FullRank",
    "PreferenceProgram",
    "parse_preferences",
    "compile_target",
    "render_program",
    "llm_elicit",
    "StubLlmClient",
    "HttpLlmClient",
]


class PreferenceError(ValueError):
    """Raised on syntax errors, unknown features, or contradictions."""


@dataclass(frozen=True)
class RankChain:
    features: tuple[str, ...]


@dataclass(frozen=True)
class SignDecl:
    feature: str
    sign: int  # +1 or -1


@dataclass(frozen=True)
class FullRank:
    features: tuple[str, ...]


Statement = RankChain | SignDecl | FullRank


@dataclass
class PreferenceProgram:
    statements: list[Statement]
    source_text: str = ""

    def sign_map(self) -> dict[str, int]:
        signs: dict[str, int] = {}
        for st in self.statements:
            if isinstance(st, SignDecl):
                if st.feature in signs and signs[st.feature] != st.sign:
                    raise PreferenceError(
                        f"contradictory signs for feature '{st.feature}'")
                signs[st.feature] = st.sign
        return signs


class _Resolver:
    def __init__(self, feature_names: list[str]):
        self.names = list(feature_names)
        self.lower = {n.lower(): n for n in feature_names}

    def resolve(self, token: str, position: str) -> str:
        name = self.lower.get(token.lower())
        if name is None:
            close = difflib.get_close_matches(token.lower(), list(self.lower), n=1)
            hint = f"; did you mean '{self.lower[close[0]]}'?" if close else ""
            raise PreferenceError(
                f"unknown feature '{token}' at {position}{hint}")
        return name


def parse_preferences(text: str, feature_names: list[str]) -> PreferenceProgram:
    """Parse DSL text into a validated PreferenceProgram."""
    resolver = _Resolver(feature_names)
    statements: list[Statement] = []
    raw_statements = []
    for line_no, line in enumerate(text.splitlines() or [""], start=1):
        for part in line.split(";"):
            if part.strip():
                raw_statements.append((line_no, part.strip()))
    for line_no, stmt in raw_statements:
        position = f"line {line_no}: {stmt!r}"
        if stmt.lower().startswith("rank:"):
            tokens = [t.strip() for t in stmt[5:].split(",")]
            if not all(tokens):
                raise PreferenceError(f"empty feature name in {position}")
            features = [resolver.resolve(t, position) for t in tokens]
            if len(set(features)) != len(features):
                raise PreferenceError(f"duplicate feature in rank list at {position}")
            statements.append(FullRank(features=tuple(features)))
        elif stmt.lower().startswith("sign(") or stmt.lower().startswith("sign ("):
            inner = stmt[stmt.index("(") + 1:]
            if ")" not in inner or "=" not in inner:
                raise PreferenceError(f"malformed sign declaration at {position}")
            name_tok, rest = inner.split(")", 1)
            rest = rest.strip()
            if not rest.startswith("="):
                raise PreferenceError(f"expected '=' in sign declaration at {position}")
            sign_tok = rest[1:].strip()
            if sign_tok not in ("+", "-"):
                raise PreferenceError(
                    f"sign must be '+' or '-' at {position}, got {sign_tok!r}")
            feature = resolver.resolve(name_tok.strip(), position)
            statements.append(SignDecl(feature=feature,
                                       sign=1 if sign_tok == "+" else -1))
        elif ">" in stmt:
            tokens = [t.strip() for t in stmt.split(">")]
            if len(tokens) < 2 or not all(tokens):
                raise PreferenceError(f"malformed chain at {position}")
            features = [resolver.resolve(t, position) for t in tokens]
            statements.append(RankChain(features=tuple(features)))
        else:
            raise PreferenceError(f"unrecognized statement at {position}")
    program = PreferenceProgram(statements=statements, source_text=text)
    program.sign_map()  # surfaces contradictory duplicates
    full_ranks = [s for s in program.statements if isinstance(s, FullRank)]
    if len(full_ranks) > 1:
        raise PreferenceError("at most one 'rank:' statement is allowed")
    return program


def compile_target(
    prog: PreferenceProgram,
    reference_ranking: Ranking,
    feature_names: list[str],
    stakeholder_id: str = "default",
    source: str = "dsl",
) -> StakeholderTarget:
    """Merge the program into a full target ranking plus optional signs.

    A 'rank:' statement wins outright (unlisted features follow in
    reference order). Otherwise chain constraints are merged topologically,
    listed features first, everything else appended in reference order.
    """
    p = reference_ranking.p
    if len(feature_names) != p:
        raise PreferenceError("feature name list does not match ranking size")
    ref_order = [feature_names[i] for i in reference_ranking.order()]

    full = next((s for s in prog.statements if isinstance(s, FullRank)), None)
    if full is not None:
        ordered = list(full.features)
        ordered += [n for n in ref_order if n not in set(ordered)]
    else:
        chains = [s for s in prog.statements if isinstance(s, RankChain)]
        constrained: list[str] = []
        for ch in chains:
            for name in ch.features:
                if name not in constrained:
                    constrained.append(name)
        edges: dict[str, set[str]] = {n: set() for n in constrained}
        indeg: dict[str, int] = {n: 0 for n in constrained}
        for ch in chains:
            for a, b in zip(ch.features, ch.features[1:]):
                if b not in edges[a]:
                    edges[a].add(b)
                    indeg[b] += 1
        ref_rank = {name: i for i, name in enumerate(ref_order)}
        ordered = []
        ready = sorted((n for n in constrained if indeg[n] == 0),
                       key=ref_rank.__getitem__)
        while ready:
            node = ready.pop(0)
            ordered.append(node)
            for nxt in sorted(edges[node], key=ref_rank.__getitem__):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
            ready.sort(key=ref_rank.__getitem__)
        if len(ordered) != len(constrained):
            raise PreferenceError("cyclic preference")
        ordered += [n for n in ref_order if n not in set(ordered)]

    name_to_idx = {n: i for i, n in enumerate(feature_names)}
    ranks = np.empty(p, dtype=np.int64)
    for pos, name in enumerate(ordered, start=1):
        ranks[name_to_idx[name]] = pos
    signs = np.zeros(p)
    for name, sign in prog.sign_map().items():
        signs[name_to_idx[name]] = sign
    return StakeholderTarget(
        target_ranking=Ranking(ranks=ranks),
        target_signs=signs if signs.any() else None,
        source=source,
        stakeholder_id=stakeholder_id,
    )


def render_program(prog: PreferenceProgram) -> str:
    """DSL text that parses back to an equivalent program."""
    lines = []
    for st in prog.statements:
        if isinstance(st, FullRank):
            lines.append("rank: " + ", ".join(st.features))
        elif isinstance(st, RankChain):
            lines.append(" > ".join(st.features))
        else:
            lines.append(f"sign({st.feature}) = {'+' if st.sign > 0 else '-'}")
    return "\n".join(lines)


def _statements_from_json(payload: list[dict],
                          feature_names: list[str]) -> PreferenceProgram:
    resolver = _Resolver(feature_names)
    statements: list[Statement] = []
    for i, item in enumerate(payload):
        kind = item.get("type")
        where = f"backend statement {i}"
        if kind == "chain":
            feats = [resolver.resolve(t, where) for t in item.get("features", [])]
            if len(feats) < 2:
                raise PreferenceError(f"chain too short in {where}")
            statements.append(RankChain(features=tuple(feats)))
        elif kind == "sign":
            feat = resolver.resolve(item.get("feature", ""), where)
            sign = item.get("sign")
            if sign not in ("+", "-"):
                raise PreferenceError(f"invalid sign in {where}: {sign!r}")
            statements.append(SignDecl(feature=feat, sign=1 if sign == "+" else -1))
        elif kind == "rank":
            feats = [resolver.resolve(t, where) for t in item.get("features", [])]
            if len(set(feats)) != len(feats):
                raise PreferenceError(f"duplicate feature in {where}")
            statements.append(FullRank(features=tuple(feats)))
        else:
            raise PreferenceError(f"unknown statement type in {where}: {kind!r}")
    program = PreferenceProgram(statements=statements, source_text="")
    program.sign_map()
    return program


class StubLlmClient:
    """Deterministic stand-in: treats the text as DSL and parses it directly."""

    def elicit(self, text: str, feature_names: list[str]) -> PreferenceProgram:
        return parse_preferences(text, feature_names)


class HttpLlmClient:
    """JSON-over-HTTP backend configured through environment variables.

    POSTs {text, feature_names} to EXAGREE_LLM_ENDPOINT and expects
    {statements: [...]}; EXAGREE_LLM_KEY is sent as a bearer token and
    EXAGREE_LLM_TIMEOUT_MS bounds each attempt.
    """

    def __init__(self, endpoint: str | None = None, key: str | None = None,
                 timeout_ms: int | None = None, retries: int = 2):
        self.endpoint = endpoint or os.environ.get("EXAGREE_LLM_ENDPOINT")
        self.key = key or os.environ.get("EXAGREE_LLM_KEY")
        self.timeout_ms = timeout_ms or int(
            os.environ.get("EXAGREE_LLM_TIMEOUT_MS", "10000"))
        self.retries = retries
        if not self.endpoint:
            raise PreferenceError(
                "no language-model endpoint configured (EXAGREE_LLM_ENDPOINT)")

    def elicit(self, text: str, feature_names: list[str]) -> PreferenceProgram:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    data=json.dumps({"text": text, "feature_names": feature_names}),
                    headers=headers,
                    timeout=self.timeout_ms / 1000.0,
                )
                resp.raise_for_status()
                payload = resp.json()
                return _statements_from_json(payload.get("statements", []),
                                             feature_names)
            except PreferenceError:
                raise
            except Exception as exc:  # noqa: BLE001 - network layer
                last_error = exc
        raise PreferenceError(
            f"language-model backend unreachable after {self.retries + 1} "
            f"attempts: {last_error}")


def llm_elicit(text: str, feature_names: list[str], client) -> PreferenceProgram:
    """Route text through a natural-language client and re-validate the result."""
    program = client.elicit(text, feature_names)
    # Re-validate regardless of backend: names, duplicates, contradictions.
    resolver = _Resolver(feature_names)
    for st in program.statements:
        if isinstance(st, (RankChain, FullRank)):
            for name in st.features:
                resolver.resolve(name, "validation")
        else:
            resolver.resolve(st.feature, "validation")
    program.sign_map()
    return program
