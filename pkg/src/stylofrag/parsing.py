"""Error-tolerant parsing of incomplete C++ fragments.

A small island-style parser: recognized constructs become typed nodes, and
anything unrecognizable is swallowed into Unknown leaves. The parser is total
by contract: it must produce a tree for arbitrary byte strings, including
truncated or unbalanced code, and never raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

NODE_KINDS = frozenset({
    "TranslationUnit", "FunctionDef", "Block", "If", "Else", "For", "While",
    "DoWhile", "Switch", "Case", "Return", "Decl", "Assign", "Call",
    "BinaryOp", "UnaryOp", "Literal", "Identifier", "Index", "Member",
    "TemplateRef", "Preproc", "Label", "ExprStatement", "Unknown",
})


@dataclass(frozen=True)
class SyntaxNode:
    kind: str
    children: tuple = ()
    token_text: str | None = field(default=None)

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def node(kind: str, children=()) -> SyntaxNode:
    return SyntaxNode(kind, tuple(children))


def leaf(kind: str, text: str | None = None) -> SyntaxNode:
    return SyntaxNode(kind, (), text)


class Token(NamedTuple):
    kind: str  # IDENT, NUMBER, STR, CHR, PREPROC, PUNCT
    text: str


_MULTI_PUNCT = (
    "<<=", ">>=", "->*", "...", "::", "->", "++", "--", "<<", ">>", "<=",
    ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=",
)

TYPE_KEYWORDS = frozenset({
    "int", "long", "short", "char", "float", "double", "bool", "void",
    "auto", "unsigned", "signed", "const", "static", "constexpr", "struct",
    "class", "enum", "union", "volatile", "register", "extern", "size_t",
})

_ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
                         "<<=", ">>="})
_BINARY_OPS = frozenset({"+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==",
                         "!=", "&&", "||", "&", "|", "^", "<<", ">>", ",",
                         "?", ":"})
_PREFIX_OPS = frozenset({"!", "~", "++", "--", "-", "+", "*", "&"})


def lex(source: str) -> list[Token]:
    """Tokenize for the fuzzy parser. Total: any input lexes."""
    tokens: list[Token] = []
    i = 0
    n = len(source)
    at_line_start = True
    while i < n:
        ch = source[i]
        if ch == "\n":
            at_line_start = True
            i += 1
            continue
        if ch.isspace():
            i += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            i = n if end < 0 else end + 2
            continue
        if ch == "#" and at_line_start:
            j = i
            while j < n and source[j] != "\n":
                j += 1
            tokens.append(Token("PREPROC", source[i:j]))
            i = j
            continue
        at_line_start = False
        if ch == '"' or ch == "'":
            quote = ch
            j = i + 1
            while j < n and source[j] != quote and source[j] != "\n":
                if source[j] == "\\":
                    j += 1
                j += 1
            i = min(j + 1, n)
            tokens.append(Token("STR" if quote == '"' else "CHR", quote))
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", source[i:j]))
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and (source[j].isalnum() or source[j] in "._"):
                j += 1
            tokens.append(Token("NUMBER", source[i:j]))
            i = j
            continue
        for op in _MULTI_PUNCT:
            if source.startswith(op, i):
                tokens.append(Token("PUNCT", op))
                i += len(op)
                break
        else:
            tokens.append(Token("PUNCT", ch))
            i += 1
    return tokens


_MAX_DEPTH = 120


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.depth = 0

    # -- token access ------------------------------------------------------
    def eof(self) -> bool:
        return self.i >= len(self.toks)

    def peek(self, offset: int = 0) -> Token | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def advance(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "PUNCT" and tok.text == text

    def at_ident(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "IDENT" and tok.text == text

    # -- entry -------------------------------------------------------------
    def parse_unit(self) -> SyntaxNode:
        items = []
        while not self.eof():
            start = self.i
            items.append(self.parse_toplevel())
            if self.i == start:  # safety: always make progress
                items.append(leaf("Unknown", self.advance().text))
        return node("TranslationUnit", items)

    def parse_toplevel(self) -> SyntaxNode:
        if self._function_def_ahead():
            return self.parse_function_def()
        return self.parse_statement()

    def _function_def_ahead(self) -> bool:
        # type tokens ... IDENT '(' ... ')' '{'  within a short window
        j = self.i
        limit = min(len(self.toks), j + 40)
        saw_ident = False
        while j < limit:
            tok = self.toks[j]
            if tok.kind == "IDENT":
                saw_ident = True
                j += 1
                continue
            if tok.kind == "PUNCT" and tok.text in ("::", "*", "&", "~"):
                j += 1
                continue
            break
        if not saw_ident or j <= self.i + 1:
            return False
        if j >= len(self.toks) or self.toks[j] != Token("PUNCT", "("):
            return False
        depth = 0
        while j < limit:
            tok = self.toks[j]
            if tok == Token("PUNCT", "("):
                depth += 1
            elif tok == Token("PUNCT", ")"):
                depth -= 1
                if depth == 0:
                    return j + 1 < len(self.toks) and (
                        self.toks[j + 1] == Token("PUNCT", "{")
                    )
            elif tok.text in (";", "{"):
                return False
            j += 1
        return False

    def parse_function_def(self) -> SyntaxNode:
        while not self.eof() and not self.at_punct("("):
            self.advance()
        if self.at_punct("("):
            depth = 0
            while not self.eof():
                tok = self.advance()
                if tok == Token("PUNCT", "("):
                    depth += 1
                elif tok == Token("PUNCT", ")"):
                    depth -= 1
                    if depth == 0:
                        break
        body = self.parse_block() if self.at_punct("{") else node("Block", [])
        return node("FunctionDef", [body])

    # -- statements --------------------------------------------------------
    def parse_block(self) -> SyntaxNode:
        children = []
        if self.at_punct("{"):
            self.advance()
        while not self.eof() and not self.at_punct("}"):
            start = self.i
            children.append(self.parse_statement())
            if self.i == start:
                children.append(leaf("Unknown", self.advance().text))
        if self.at_punct("}"):
            self.advance()
        return node("Block", children)

    def parse_statement(self) -> SyntaxNode:
        if self.depth >= _MAX_DEPTH:
            return leaf("Unknown", self.advance().text if not self.eof() else None)
        self.depth += 1
        try:
            return self._parse_statement_inner()
        finally:
            self.depth -= 1

    def _parse_statement_inner(self) -> SyntaxNode:
        tok = self.peek()
        if tok is None:
            return leaf("Unknown")
        if tok.kind == "PREPROC":
            self.advance()
            return leaf("Preproc", tok.text)
        if tok.kind == "PUNCT":
            if tok.text == "{":
                return self.parse_block()
            if tok.text == ";":
                self.advance()
                return node("ExprStatement", [])
            if tok.text == "}":  # stray close outside any block
                return leaf("Unknown", self.advance().text)
        if tok.kind == "IDENT":
            handler = {
                "if": self._parse_if,
                "for": self._parse_for,
                "while": self._parse_while,
                "do": self._parse_do,
                "switch": self._parse_switch,
                "case": self._parse_case,
                "default": self._parse_case,
                "return": self._parse_return,
            }.get(tok.text)
            if handler is not None:
                return handler()
            if self._function_def_ahead():
                return self.parse_function_def()
            nxt = self.peek(1)
            if (
                nxt == Token("PUNCT", ":")
                and self.peek(2) != Token("PUNCT", ":")
            ):
                self.advance()
                self.advance()
                return leaf("Label", tok.text)
            if self._decl_ahead():
                return self._parse_decl()
        expr = self.parse_expression({";", "}", "{"})
        if self.at_punct(";"):
            self.advance()
        if expr is None:
            if self.eof():
                return node("ExprStatement", [])
            return leaf("Unknown", self.advance().text)
        return node("ExprStatement", [expr])

    def _decl_ahead(self) -> bool:
        t0, t1 = self.peek(), self.peek(1)
        if t0 is None or t0.kind != "IDENT":
            return False
        if t0.text in TYPE_KEYWORDS:
            return True
        if t1 is None:
            return False
        if t1.kind == "IDENT" and t1.text not in ("and", "or", "not"):
            return True
        # pointer/reference declarator: T* x = ... / T& x;
        if t1.kind == "PUNCT" and t1.text in ("*", "&"):
            t2, t3 = self.peek(2), self.peek(3)
            return (
                t2 is not None and t2.kind == "IDENT"
                and t3 is not None
                and t3.text in ("=", ";", ",", ")")
            )
        return False

    def _parse_decl(self) -> SyntaxNode:
        children = []
        # consume type and declarator tokens until an initializer or terminator
        while not self.eof():
            tok = self.peek()
            if tok.kind == "PREPROC" or tok.text in (";", "}", "{"):
                break
            if tok.kind == "PUNCT" and tok.text == "=":
                self.advance()
                init = self.parse_expression({";", "}", ","})
                if init is not None:
                    children.append(init)
                continue
            if tok.kind == "PUNCT" and tok.text == "(":
                # constructor-style or function-like initializer
                call = self.parse_expression({";", "}"})
                if call is not None:
                    children.append(call)
                continue
            if tok.kind == "IDENT" and self.peek(1) == Token("PUNCT", "<"):
                tmpl = self._try_template_ref()
                if tmpl is not None:
                    children.append(tmpl)
                    continue
            self.advance()
        if self.at_punct(";"):
            self.advance()
        return node("Decl", children)

    def _parse_paren_condition(self) -> SyntaxNode | None:
        if not self.at_punct("("):
            return None
        self.advance()
        cond = self.parse_expression({")", "{", ";", "}"})
        if self.at_punct(")"):
            self.advance()
        return cond

    def _parse_if(self) -> SyntaxNode:
        self.advance()
        children = []
        cond = self._parse_paren_condition()
        if cond is not None:
            children.append(cond)
        children.append(self.parse_statement())
        if self.at_ident("else"):
            self.advance()
            children.append(node("Else", [self.parse_statement()]))
        return node("If", children)

    def _parse_while(self) -> SyntaxNode:
        self.advance()
        children = []
        cond = self._parse_paren_condition()
        if cond is not None:
            children.append(cond)
        children.append(self.parse_statement())
        return node("While", children)

    def _parse_do(self) -> SyntaxNode:
        self.advance()
        children = [self.parse_statement()]
        if self.at_ident("while"):
            self.advance()
            cond = self._parse_paren_condition()
            if cond is not None:
                children.append(cond)
        if self.at_punct(";"):
            self.advance()
        return node("DoWhile", children)

    def _parse_for(self) -> SyntaxNode:
        self.advance()
        children = []
        if self.at_punct("("):
            self.advance()
            depth = 1
            while not self.eof() and depth > 0:
                if self.at_punct(")"):
                    depth -= 1
                    self.advance()
                    break
                if self.at_punct(";") or self.at_punct(":"):
                    self.advance()
                    continue
                if self.at_punct("{"):
                    break
                start = self.i
                if self._decl_ahead():
                    part = self._parse_for_clause_decl()
                else:
                    part = self.parse_expression({";", ")", ":", "{", "}"})
                if part is not None:
                    children.append(part)
                if self.i == start:
                    self.advance()
        children.append(self.parse_statement())
        return node("For", children)

    def _parse_for_clause_decl(self) -> SyntaxNode:
        children = []
        while not self.eof():
            tok = self.peek()
            if tok.text in (";", ")", ":", "{", "}") or tok.kind == "PREPROC":
                break
            if tok.kind == "PUNCT" and tok.text == "=":
                self.advance()
                init = self.parse_expression({";", ")", ":", "}"})
                if init is not None:
                    children.append(init)
                continue
            self.advance()
        return node("Decl", children)

    def _parse_switch(self) -> SyntaxNode:
        self.advance()
        children = []
        cond = self._parse_paren_condition()
        if cond is not None:
            children.append(cond)
        children.append(self.parse_statement())
        return node("Switch", children)

    def _parse_case(self) -> SyntaxNode:
        self.advance()
        children = []
        expr = self.parse_expression({":", ";", "}", "{"})
        if expr is not None:
            children.append(expr)
        if self.at_punct(":"):
            self.advance()
        return node("Case", children)

    def _parse_return(self) -> SyntaxNode:
        self.advance()
        children = []
        expr = self.parse_expression({";", "}"})
        if expr is not None:
            children.append(expr)
        if self.at_punct(";"):
            self.advance()
        return node("Return", children)

    # -- expressions -------------------------------------------------------
    def parse_expression(self, stops: set[str]) -> SyntaxNode | None:
        if self.depth >= _MAX_DEPTH:
            if not self.eof() and self.peek().text not in stops:
                return leaf("Unknown", self.advance().text)
            return None
        self.depth += 1
        try:
            return self._parse_expression_inner(stops)
        finally:
            self.depth -= 1

    def _at_stop(self, stops: set[str]) -> bool:
        tok = self.peek()
        return tok is None or tok.kind == "PREPROC" or tok.text in stops

    def _parse_expression_inner(self, stops: set[str]) -> SyntaxNode | None:
        left = self.parse_unary(stops)
        if left is None:
            return None
        while not self._at_stop(stops):
            tok = self.peek()
            if tok.kind == "PUNCT" and tok.text in _ASSIGN_OPS:
                self.advance()
                rhs = self.parse_expression(stops)
                left = node("Assign", [left] + ([rhs] if rhs is not None else []))
            elif tok.kind == "PUNCT" and tok.text in _BINARY_OPS:
                self.advance()
                right = self.parse_unary(stops)
                if right is None:
                    break
                left = node("BinaryOp", [left, right])
            else:
                break
        return left

    def parse_unary(self, stops: set[str]) -> SyntaxNode | None:
        if self._at_stop(stops):
            return None
        if self.depth >= _MAX_DEPTH:
            return leaf("Unknown", self.advance().text)
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text in _PREFIX_OPS:
            self.advance()
            self.depth += 1
            try:
                operand = self.parse_unary(stops)
            finally:
                self.depth -= 1
            children = [operand] if operand is not None else []
            return node("UnaryOp", children)
        return self.parse_postfix(stops)

    def parse_postfix(self, stops: set[str]) -> SyntaxNode | None:
        base = self.parse_primary(stops)
        if base is None:
            return None
        while not self.eof():
            tok = self.peek()
            if tok.kind != "PUNCT":
                break
            if tok.text == "(":
                self.advance()
                args = self._parse_call_args()
                base = node("Call", [base] + args)
            elif tok.text == "[":
                self.advance()
                idx = self.parse_expression({"]", ";", "}"})
                if self.at_punct("]"):
                    self.advance()
                base = node("Index", [base] + ([idx] if idx is not None else []))
            elif tok.text in (".", "->"):
                self.advance()
                member = self.peek()
                if member is not None and member.kind == "IDENT":
                    self.advance()
                    base = node("Member", [base, leaf("Identifier", member.text)])
                else:
                    base = node("Member", [base])
            elif tok.text in ("++", "--"):
                self.advance()
                base = node("UnaryOp", [base])
            elif tok.text == "<" and base.kind == "Identifier":
                tmpl = self._try_template_suffix(base)
                if tmpl is None:
                    break
                base = tmpl
            else:
                break
        return base

    def _parse_call_args(self) -> list[SyntaxNode]:
        args = []
        depth_guard = 0
        while not self.eof() and not self.at_punct(")"):
            start = self.i
            arg = self.parse_expression({",", ")", ";", "}"})
            if arg is not None:
                args.append(arg)
            if self.at_punct(","):
                self.advance()
            if self.i == start:
                self.advance()
            depth_guard += 1
            if depth_guard > 500:
                break
            tok = self.peek()
            if tok is not None and tok.text in (";", "}"):
                break
        if self.at_punct(")"):
            self.advance()
        return args

    def parse_primary(self, stops: set[str]) -> SyntaxNode | None:
        if self._at_stop(stops):
            return None
        tok = self.advance()
        if tok.kind == "NUMBER":
            return leaf("Literal", tok.text)
        if tok.kind == "STR":
            return leaf("Literal", "STR")
        if tok.kind == "CHR":
            return leaf("Literal", "CHR")
        if tok.kind == "IDENT":
            return leaf("Identifier", tok.text)
        if tok.kind == "PUNCT" and tok.text == "(":
            inner = self.parse_expression({")", ";", "}"})
            if self.at_punct(")"):
                self.advance()
            return inner if inner is not None else node("ExprStatement", [])
        return leaf("Unknown", tok.text)

    def _template_span(self, start: int) -> int | None:
        """Index just past the matching '>' of a 'ident <' at start, or None."""
        depth = 0
        j = start
        limit = min(len(self.toks), start + 60)
        while j < limit:
            tok = self.toks[j]
            if tok.kind == "PUNCT" and tok.text == "<":
                depth += 1
            elif tok.kind == "PUNCT" and tok.text == ">":
                depth -= 1
                if depth == 0:
                    return j + 1
            elif tok.kind == "IDENT" or (
                tok.kind in ("NUMBER",)
                or (tok.kind == "PUNCT" and tok.text in ("::", ",", "*", "&"))
            ):
                pass
            else:
                return None
            j += 1
        return None

    def _try_template_suffix(self, base: SyntaxNode) -> SyntaxNode | None:
        end = self._template_span(self.i)
        if end is None:
            return None
        self.i = end
        return node("TemplateRef", [base])

    def _try_template_ref(self) -> SyntaxNode | None:
        name = self.peek()
        end = self._template_span(self.i + 1)
        if end is None:
            return None
        self.advance()
        self.i = end
        return node("TemplateRef", [leaf("Identifier", name.text)])


def fuzzy_parse(source: str) -> SyntaxNode:
    """Best-effort parse of (possibly wrapped) fragment text.

    Total function: never raises on invalid or truncated code. The returned
    tree is rooted at TranslationUnit.
    """
    return _Parser(lex(source)).parse_unit()


def node_unigrams(tree: SyntaxNode) -> dict[str, int]:
    counts: dict[str, int] = {}
    for n in tree.walk():
        counts[n.kind] = counts.get(n.kind, 0) + 1
    return counts


def node_bigrams(tree: SyntaxNode) -> dict[str, int]:
    counts: dict[str, int] = {}
    for n in tree.walk():
        for child in n.children:
            key = f"{n.kind}>{child.kind}"
            counts[key] = counts.get(key, 0) + 1
    return counts
