"""Minimal s-expression reader that keeps source positions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DSLSyntaxError


@dataclass(frozen=True)
class Sym:
    text: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return self.text


@dataclass
class SList:
    items: list = field(default_factory=list)
    line: int = 0
    col: int = 0

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]


def _tokens(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield ch, line, col
            i += 1
            col += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        yield text[i:j], line, col
        col += j - i
        i = j


def read_all(text: str) -> list:
    """Parse every top-level form in ``text``."""
    stack: list = [SList()]
    last = (1, 1)
    for tok, line, col in _tokens(text):
        last = (line, col)
        if tok == "(":
            stack.append(SList([], line, col))
        elif tok == ")":
            if len(stack) == 1:
                raise DSLSyntaxError("unexpected ')'", line, col)
            done = stack.pop()
            stack[-1].items.append(done)
        else:
            stack[-1].items.append(Sym(tok, line, col))
    if len(stack) != 1:
        open_ = stack[-1]
        raise DSLSyntaxError(
            f"unclosed '(' opened at line {open_.line}, column {open_.col}; expected ')'",
            *last,
        )
    return stack[0].items


def pos(x) -> tuple:
    return getattr(x, "line", 0), getattr(x, "col", 0)


def expect_list(x, what: str) -> SList:
    if not isinstance(x, SList):
        raise DSLSyntaxError(f"expected {what}, found {x}", *pos(x))
    return x


def expect_sym(x, what: str) -> str:
    if not isinstance(x, Sym):
        raise DSLSyntaxError(f"expected {what}, found a list", *pos(x))
    return x.text


def to_text(x) -> str:
    if isinstance(x, Sym):
        return x.text
    return "(" + " ".join(to_text(i) for i in x.items) + ")"
