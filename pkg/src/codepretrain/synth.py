"""Synthetic source snippets for tests, demos, and the bundled corpus.

Everything is driven by a caller-supplied ``numpy.random.Generator`` so that
corpora are reproducible.  Snippets are small but syntactically plausible for
the target language, with identifier names drawn from a readable pool.
"""

from __future__ import annotations

import numpy as np

from . import lexer as lx
from .corpus import CodeDocument, RawRecord, normalize

_NAMES = [
    "count", "total", "value", "item", "index", "result", "buffer", "limit",
    "offset", "size", "name", "flag", "data", "node", "cursor", "temp",
    "acc", "sum_val", "alpha", "beta", "gamma", "delta", "width", "height",
    "score", "weight", "depth", "key", "entry", "slot",
]

_NOUNS = [
    "total", "sum", "average", "maximum", "minimum", "length", "count",
    "buffer", "index", "offset", "value", "window", "score", "weight",
    "distance", "result", "range", "sequence", "table", "queue",
]

_VERBS = ["compute", "return", "update", "scan", "accumulate", "find", "track", "merge", "filter", "collect"]


def _name(rng: np.random.Generator) -> str:
    base = _NAMES[rng.integers(len(_NAMES))]
    if rng.random() < 0.3:
        return f"{base}{rng.integers(10)}"
    return base


def _fresh_names(rng: np.random.Generator, k: int) -> list[str]:
    names: list[str] = []
    while len(names) < k:
        n = _name(rng)
        if n not in names:
            names.append(n)
    return names


def random_docstring(rng: np.random.Generator) -> str:
    verb = _VERBS[rng.integers(len(_VERBS))]
    noun_a = _NOUNS[rng.integers(len(_NOUNS))]
    noun_b = _NOUNS[rng.integers(len(_NOUNS))]
    forms = [
        f"{verb} the {noun_a} of the {noun_b}",
        f"{verb} a {noun_a} from each {noun_b}",
        f"{verb} the running {noun_a} over the {noun_b}",
        f"{verb} the {noun_a} and {verb} the {noun_b}",
    ]
    return forms[rng.integers(len(forms))]


def _mini_body(rng: np.random.Generator, names: list[str]) -> list[str]:
    a, b, c = names[0], names[1], names[2]
    lines = [f"    int {c} = {rng.integers(10)};"]
    n_stmts = int(rng.integers(1, 4))
    for _ in range(n_stmts):
        pick = rng.integers(4)
        if pick == 0:
            lines.append(f"    {c} = {c} + {a};")
        elif pick == 1:
            lines.append(f"    if ({a} > {b}) {{ {c} = {c} - 1; }}")
        elif pick == 2:
            lines.append(f"    while ({a} > {rng.integers(1, 5)}) {{ {a} = {a} - 1; }}")
        else:
            lines.append(f"    {b} = {b} * {rng.integers(2, 5)};")
    lines.append(f"    return {c};")
    return lines


def _snippet_mini(rng: np.random.Generator) -> str:
    fn, a, b, c = _fresh_names(rng, 4)
    body = "\n".join(_mini_body(rng, [a, b, c]))
    return f"int {fn}(int {a}, int {b}) {{\n{body}\n}}"


def _snippet_java(rng: np.random.Generator) -> str:
    fn, a, b, c = _fresh_names(rng, 4)
    body = "\n".join(_mini_body(rng, [a, b, c]))
    return f"public int {fn}(int {a}, int {b}) {{\n{body}\n}}"


def _snippet_python(rng: np.random.Generator) -> str:
    fn, a, b, c = _fresh_names(rng, 4)
    lines = [f"def {fn}({a}, {b}):", f"    {c} = 0"]
    n_stmts = int(rng.integers(1, 4))
    for _ in range(n_stmts):
        pick = rng.integers(3)
        if pick == 0:
            lines.append(f"    {c} = {c} + {a}")
        elif pick == 1:
            lines.append(f"    if {a} > {b}:")
            lines.append(f"        {c} = {c} - 1")
        else:
            lines.append(f"    {b} = {b} * {rng.integers(2, 5)}")
    lines.append(f"    return {c}")
    return "\n".join(lines)


def _snippet_go(rng: np.random.Generator) -> str:
    fn, a, b, c = _fresh_names(rng, 4)
    lines = [f"func {fn}({a} int, {b} int) int {{", f"\t{c} := 0"]
    n_stmts = int(rng.integers(1, 4))
    for _ in range(n_stmts):
        pick = rng.integers(3)
        if pick == 0:
            lines.append(f"\t{c} = {c} + {a}")
        elif pick == 1:
            lines.append(f"\tif {a} > {b} {{ {c} = {c} - 1 }}")
        else:
            lines.append(f"\tfor {a} > 0 {{ {a} = {a} - 1 }}")
    lines.append(f"\treturn {c}")
    lines.append("}")
    return "\n".join(lines)


_SNIPPETS = {
    "mini": _snippet_mini,
    "java": _snippet_java,
    "python": _snippet_python,
    "go": _snippet_go,
}


def random_record(
    rng: np.random.Generator,
    language: str = "mini",
    bimodal_prob: float = 0.7,
) -> RawRecord:
    """One synthetic raw corpus record in the given language."""
    code = _SNIPPETS[language](rng)
    docstring = random_docstring(rng) if rng.random() < bimodal_prob else None
    return RawRecord(code=code, language=language, docstring=docstring)


def random_document(
    rng: np.random.Generator,
    lexers: dict[str, lx.LanguageLexer],
    language: str = "mini",
    bimodal_prob: float = 0.7,
) -> CodeDocument:
    """One synthetic normalized document."""
    record = random_record(rng, language=language, bimodal_prob=bimodal_prob)
    return normalize(record, lexers[language])


def random_corpus(
    rng: np.random.Generator,
    size: int,
    languages: tuple[str, ...] = ("mini", "java", "python", "go"),
    bimodal_prob: float = 0.7,
) -> list[RawRecord]:
    """A corpus cycling through ``languages`` so per-language counts are balanced."""
    return [
        random_record(rng, language=languages[i % len(languages)], bimodal_prob=bimodal_prob)
        for i in range(size)
    ]


def rename_identifiers(doc: CodeDocument, rng: np.random.Generator) -> CodeDocument:
    """A structural clone of ``doc``: every distinct identifier consistently
    renamed to a fresh name from the normal pool.

    Labels and non-identifier tokens are untouched, so the result is the
    same program up to naming.
    """
    taken = set(doc.code_tokens)
    distinct: dict[str, str] = {}
    new_tokens = []
    for token, label in zip(doc.code_tokens, doc.identifier_labels):
        if label == 1:
            if token not in distinct:
                fresh = _name(rng)
                while fresh in taken or fresh in distinct.values():
                    fresh = _name(rng)
                distinct[token] = fresh
            new_tokens.append(distinct[token])
        else:
            new_tokens.append(token)
    return CodeDocument(
        nl_tokens=doc.nl_tokens,
        code_tokens=tuple(new_tokens),
        language=doc.language,
        identifier_labels=doc.identifier_labels,
    )
