"""Rule-based paraphrase generation for the /paraphrase endpoint.

Model mode uses these rewrites; stub mode serves recorded fixtures.
Similarity is token-level Jaccard, reported in [0, 1].
"""

from __future__ import annotations

from .records import tokenize

_VERB_SWAPS = {
    "show": "list",
    "list": "show",
    "display": "show",
    "what": "which",
    "which": "what",
}


def jaccard(a: str, b: str) -> float:
    sa = {t.casefold() for t in tokenize(a)}
    sb = {t.casefold() for t in tokenize(b)}
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def rule_paraphrases(question: str) -> list[tuple[str, float]]:
    if not question.strip():
        return []
    out: list[tuple[str, float]] = []
    seen = {question}

    def push(text: str) -> None:
        if text not in seen:
            seen.add(text)
            out.append((text, jaccard(question, text)))

    push("please " + question)
    toks = question.split(" ")
    head = toks[0].casefold()
    if head in _VERB_SWAPS:
        push(" ".join([_VERB_SWAPS[head]] + toks[1:]))
    push(question + " please")
    return out
