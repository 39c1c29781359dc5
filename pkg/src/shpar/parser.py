"""Parser for the supported POSIX shell subset.

Supported: pipelines, `;`, `&&`, `||`, `&`, redirections (`<`, `>`, `>>`,
fd-prefixed and dup forms), assignments, `for` loops, subshells, quoting,
`$var` references, comments.  Compound constructs outside the subset
(`if`, `while`, `case`, brace groups, functions, here-docs, ...) become
Unparsed nodes reproduced verbatim; they are scanned with a
command-position-aware bracket matcher so nothing is ever dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .shast import (
    AndOr,
    Assignment,
    Background,
    ForLoop,
    Node,
    Pipeline,
    Redirection,
    Sequence,
    SimpleCommand,
    Subshell,
    Unparsed,
    Word,
)


class ShellParseError(Exception):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


WORD_TERMINATORS = " \t\n|&;<>()"
OPERATORS = ["&&", "||", ";;", "<<", ">>", "<&", ">&", "<>", ">|",
             "|", "&", ";", "<", ">", "(", ")"]
SPECIAL_VARS = "@*#?$!-0123456789"

# Reserved words that open a construct we do not parse, with their closers.
COMPOUND_OPENERS = {
    "if": "fi",
    "while": "done",
    "until": "done",
    "case": "esac",
    "for": "done",
    "{": "}",
    "[[": "]]",
}
RESERVED = set(COMPOUND_OPENERS) | {
    "then", "else", "elif", "fi", "do", "done", "esac", "in", "}", "]]",
    "function", "!",
}


@dataclass
class Token:
    kind: str  # WORD | IONUM | OP | NEWLINE | EOF
    text: str
    span: tuple[int, int]
    parts: list | None = None


class Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.trivia: list[tuple[int, int]] = []

    def error(self, message: str, pos: int | None = None):
        raise ShellParseError(message, self.text, self.pos if pos is None else pos)

    def tokens(self) -> list[Token]:
        out = []
        while True:
            tok = self.next_token()
            out.append(tok)
            if tok.kind == "EOF":
                return out

    def _skip_trivia(self):
        text, n = self.text, len(self.text)
        while self.pos < n:
            c = text[self.pos]
            if c in " \t":
                start = self.pos
                while self.pos < n and text[self.pos] in " \t":
                    self.pos += 1
                self.trivia.append((start, self.pos))
            elif c == "\\" and self.pos + 1 < n and text[self.pos + 1] == "\n":
                self.trivia.append((self.pos, self.pos + 2))
                self.pos += 2
            elif c == "#":
                start = self.pos
                while self.pos < n and text[self.pos] != "\n":
                    self.pos += 1
                self.trivia.append((start, self.pos))
            else:
                return

    def next_token(self) -> Token:
        self._skip_trivia()
        text, n = self.text, len(self.text)
        if self.pos >= n:
            return Token("EOF", "", (n, n))
        start = self.pos
        c = text[self.pos]
        if c == "\n":
            self.pos += 1
            return Token("NEWLINE", "\n", (start, self.pos))
        for op in OPERATORS:
            if text.startswith(op, self.pos):
                self.pos += len(op)
                return Token("OP", op, (start, self.pos))
        word = self._lex_word()
        # a pure-digit word glued to a redirection operator is an fd number
        if word.raw.isdigit() and self.pos < n and text[self.pos] in "<>":
            return Token("IONUM", word.raw, word.span)
        return Token("WORD", word.raw, word.span, parts=word.parts)

    def _lex_word(self) -> Word:
        text, n = self.text, len(self.text)
        start = self.pos
        parts: list = []
        lit: list[str] = []

        def flush():
            if lit:
                parts.append(("lit", "".join(lit)))
                lit.clear()

        while self.pos < n:
            c = text[self.pos]
            if c in WORD_TERMINATORS:
                break
            if c == "\\":
                if self.pos + 1 >= n:
                    lit.append("\\")
                    self.pos += 1
                elif text[self.pos + 1] == "\n":
                    self.pos += 2  # line continuation
                else:
                    lit.append(text[self.pos + 1])
                    self.pos += 2
            elif c == "'":
                end = text.find("'", self.pos + 1)
                if end < 0:
                    self.error("unterminated single quote", self.pos)
                flush()
                parts.append(("sq", text[self.pos + 1:end]))
                self.pos = end + 1
            elif c == '"':
                flush()
                parts.append(("dq", self._lex_double_quoted()))
            elif c == "$":
                flush()
                parts.append(self._lex_dollar())
            elif c == "`":
                flush()
                parts.append(("sub", self._lex_backtick()))
            else:
                lit.append(c)
                self.pos += 1
        flush()
        if self.pos == start:
            self.error("empty word")
        return Word(raw=text[start:self.pos], parts=parts, span=(start, self.pos))

    def _lex_double_quoted(self) -> list:
        text, n = self.text, len(self.text)
        open_pos = self.pos
        self.pos += 1
        parts: list = []
        lit: list[str] = []

        def flush():
            if lit:
                parts.append(("lit", "".join(lit)))
                lit.clear()

        while True:
            if self.pos >= n:
                self.error("unterminated double quote", open_pos)
            c = text[self.pos]
            if c == '"':
                self.pos += 1
                flush()
                return parts
            if c == "\\" and self.pos + 1 < n:
                nxt = text[self.pos + 1]
                if nxt in '$`"\\':
                    lit.append(nxt)
                    self.pos += 2
                elif nxt == "\n":
                    self.pos += 2
                else:
                    lit.append(c)
                    self.pos += 1
            elif c == "$":
                flush()
                parts.append(self._lex_dollar())
            elif c == "`":
                flush()
                parts.append(("sub", self._lex_backtick()))
            else:
                lit.append(c)
                self.pos += 1

    def _lex_dollar(self):
        text, n = self.text, len(self.text)
        start = self.pos
        self.pos += 1
        if self.pos >= n:
            return ("lit", "$")
        c = text[self.pos]
        if c == "{":
            depth = 1
            self.pos += 1
            inner_start = self.pos
            while self.pos < n and depth:
                if text[self.pos] == "{":
                    depth += 1
                elif text[self.pos] == "}":
                    depth -= 1
                self.pos += 1
            if depth:
                self.error("unterminated ${", start)
            inner = text[inner_start:self.pos - 1]
            if inner.replace("_", "a").isalnum() and not inner[:1].isdigit():
                return ("var", inner)
            return ("sub", text[start:self.pos])
        if c == "(":
            depth = 0
            while self.pos < n:
                if text[self.pos] == "(":
                    depth += 1
                elif text[self.pos] == ")":
                    depth -= 1
                    if depth == 0:
                        self.pos += 1
                        return ("sub", text[start:self.pos])
                self.pos += 1
            self.error("unterminated $(", start)
        if c in SPECIAL_VARS:
            self.pos += 1
            return ("var", c)
        if c.isalpha() or c == "_":
            name_start = self.pos
            while self.pos < n and (text[self.pos].isalnum() or text[self.pos] == "_"):
                self.pos += 1
            return ("var", text[name_start:self.pos])
        return ("lit", "$")

    def _lex_backtick(self) -> str:
        text, n = self.text, len(self.text)
        start = self.pos
        self.pos += 1
        while self.pos < n:
            if text[self.pos] == "\\" and self.pos + 1 < n:
                self.pos += 2
                continue
            if text[self.pos] == "`":
                self.pos += 1
                return text[start:self.pos]
            self.pos += 1
        self.error("unterminated backquote", start)


def _split_assignment(tok: Token) -> tuple[str, Word] | None:
    """Return (name, value-word) if the token is NAME=... with unquoted '='."""
    if tok.kind != "WORD" or not tok.parts:
        return None
    first = tok.parts[0]
    if first[0] != "lit" or "=" not in first[1]:
        return None
    name, _, rest = first[1].partition("=")
    if not name or name[0].isdigit() or not name.replace("_", "a").isalnum():
        return None
    value_parts = ([("lit", rest)] if rest else []) + list(tok.parts[1:])
    raw_value = tok.text[len(name) + 1:]
    start = tok.span[0] + len(name) + 1
    return name, Word(raw=raw_value, parts=value_parts, span=(start, tok.span[1]))


class Parser:
    def __init__(self, text: str):
        self.text = text
        lexer = Lexer(text)
        self.toks = lexer.tokens()
        self.trivia = lexer.trivia
        self.idx = 0

    # -- token helpers -------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.idx + ahead, len(self.toks) - 1)
        return self.toks[i]

    def take(self) -> Token:
        tok = self.toks[self.idx]
        if tok.kind != "EOF":
            self.idx += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text in ops

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ShellParseError(message, self.text, tok.span[0])

    def skip_newlines(self):
        while self.peek().kind == "NEWLINE":
            self.take()

    # -- grammar -------------------------------------------------------

    def parse_script(self) -> Sequence:
        items = self.parse_list(stop=lambda: self.peek().kind == "EOF")
        if self.peek().kind != "EOF":
            self.error(f"unexpected {self.peek().text!r}")
        return Sequence(items, span=(0, len(self.text)))

    def parse_list(self, stop) -> list[Node]:
        items: list[Node] = []
        self.skip_newlines()
        while not stop():
            node = self.parse_and_or()
            if self.at_op("&"):
                self.take()
                if isinstance(node, Pipeline):
                    node.background = True
                else:
                    node = Background(node, span=node.span)
            elif self.at_op(";"):
                self.take()
            elif self.peek().kind == "NEWLINE":
                self.take()
            elif not stop():
                self.error(f"unexpected {self.peek().text!r}")
            items.append(node)
            self.skip_newlines()
        return items

    def parse_and_or(self) -> Node:
        node: Node = self.parse_pipeline()
        while self.at_op("&&", "||"):
            op = self.take().text
            self.skip_newlines()
            right = self.parse_pipeline()
            node = AndOr(op, node, right, span=(node.span[0], right.span[1]))
        return node

    def parse_pipeline(self) -> Node:
        first = self.parse_command()
        if isinstance(first, (Assignment, Unparsed, ForLoop, Subshell)) \
                and not self.at_op("|"):
            return first
        commands = [first]
        while self.at_op("|"):
            self.take()
            self.skip_newlines()
            commands.append(self.parse_command())
        span = (commands[0].span[0], commands[-1].span[1])
        return Pipeline(commands, span=span)

    def parse_command(self) -> Node:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "(":
            return self.parse_subshell()
        if tok.kind == "OP" and tok.text == "<<":
            # here-docs break token-level scanning; keep the rest verbatim
            return self.unparsed_to_eof()
        if tok.kind == "WORD":
            word = tok.text
            if word == "for":
                return self.parse_for()
            if word in COMPOUND_OPENERS:
                return self.unparsed_compound()
            if word in ("!", "function"):
                return self.unparsed_until_separator(through_pipes=True)
            if word in RESERVED:
                self.error(f"unexpected reserved word {word!r}")
            nxt = self.peek(1)
            if nxt.kind == "OP" and nxt.text == "(":
                # name () { ... } function definition
                return self.unparsed_function()
        return self.parse_simple_command()

    def parse_subshell(self) -> Subshell:
        open_tok = self.take()
        body = self.parse_list(stop=lambda: self.at_op(")") or self.peek().kind == "EOF")
        if not self.at_op(")"):
            self.error("expected ')'")
        close = self.take()
        redirs = self.parse_redirections()
        end = redirs[-1].span[1] if redirs else close.span[1]
        seq = Sequence(body, span=(open_tok.span[1], close.span[0]))
        return Subshell(seq, redirs, span=(open_tok.span[0], end))

    def parse_for(self) -> Node:
        start = self.peek().span[0]
        mark = self.idx
        self.take()  # for
        name_tok = self.peek()
        if name_tok.kind != "WORD" or not name_tok.text.replace("_", "a").isalnum():
            self.idx = mark
            return self.unparsed_compound()
        var = self.take().text
        self.skip_newlines()
        if not (self.peek().kind == "WORD" and self.peek().text == "in"):
            self.idx = mark
            return self.unparsed_compound()
        self.take()  # in
        words: list[Word] = []
        while self.peek().kind == "WORD":
            tok = self.take()
            words.append(Word(tok.text, tok.parts or [], span=tok.span))
        if self.at_op(";"):
            self.take()
        elif self.peek().kind != "NEWLINE":
            self.idx = mark
            return self.unparsed_compound()
        self.skip_newlines()
        if not (self.peek().kind == "WORD" and self.peek().text == "do"):
            self.idx = mark
            return self.unparsed_compound()
        self.take()  # do
        body_items = self.parse_list(
            stop=lambda: (self.peek().kind == "WORD" and self.peek().text == "done")
            or self.peek().kind == "EOF"
        )
        if self.peek().kind == "EOF":
            self.error("missing 'done'")
        done_tok = self.take()
        redirs = self.parse_redirections()
        end = redirs[-1].span[1] if redirs else done_tok.span[1]
        body = Sequence(body_items, span=(0, 0))
        return ForLoop(var, words, body, redirs, span=(start, end))

    def parse_simple_command(self) -> Node:
        start_tok = self.peek()
        mark = self.idx
        assignments: list[tuple[str, Word, Token]] = []
        while True:
            tok = self.peek()
            split = _split_assignment(tok) if tok.kind == "WORD" else None
            if split is None:
                break
            self.take()
            assignments.append((split[0], split[1], tok))

        words: list[Word] = []
        redirs: list[Redirection] = []
        while True:
            tok = self.peek()
            if tok.kind == "WORD":
                self.take()
                words.append(Word(tok.text, tok.parts or [], span=tok.span))
            elif tok.kind == "OP" and tok.text == "<<":
                # here-doc bodies defeat token-level scanning; keep the rest
                # of the script verbatim rather than risk mangling it
                self.idx = mark
                return self.unparsed_to_eof()
            elif tok.kind == "IONUM" or (tok.kind == "OP" and tok.text in ("<", ">", ">>", "<&", ">&", "<>", ">|")):
                redirs.append(self.parse_redirection())
            else:
                break

        if not words and not redirs:
            if len(assignments) == 1:
                name, value, tok = assignments[0]
                return Assignment(name, value, span=tok.span)
            if len(assignments) > 1:
                span = (assignments[0][2].span[0], assignments[-1][2].span[1])
                return Unparsed(self.text[span[0]:span[1]], span=span)
            self.error(f"expected command, found {self.peek().text!r}")

        last = redirs[-1].span[1] if redirs else 0
        if words:
            last = max(last, words[-1].span[1])
        prefix = [Word(f"{n}={w.raw}", [("lit", f"{n}=")] + w.parts,
                       span=(t.span[0], t.span[1]))
                  for n, w, t in assignments]
        return SimpleCommand(
            words, redirs, prefix_assignments=prefix,
            span=(start_tok.span[0], last),
        )

    def parse_redirection(self) -> Redirection:
        fd = None
        start = self.peek().span[0]
        if self.peek().kind == "IONUM":
            fd = int(self.take().text)
        tok = self.take()
        if tok.kind != "OP" or tok.text not in ("<", ">", ">>", "<&", ">&", "<>", ">|"):
            self.error("malformed redirection", tok)
        target = self.peek()
        if target.kind != "WORD":
            self.error("malformed redirection: missing target", tok)
        self.take()
        word = Word(target.text, target.parts or [], span=target.span)
        return Redirection(tok.text, word, fd, span=(start, target.span[1]))

    def parse_redirections(self) -> list[Redirection]:
        out = []
        while self.peek().kind == "IONUM" or (
            self.peek().kind == "OP"
            and self.peek().text in ("<", ">", ">>", "<&", ">&", "<>", ">|")
        ):
            out.append(self.parse_redirection())
        return out

    # -- out-of-subset handling ---------------------------------------

    def unparsed_to_eof(self) -> Unparsed:
        start = self.peek().span[0]
        while self.peek().kind != "EOF":
            self.take()
        span = (start, len(self.text))
        return Unparsed(self.text[span[0]:span[1]], span=span)

    def unparsed_until_separator(self, through_pipes: bool = False) -> Unparsed:
        """Consume a statement we cannot model, stopping at a separator."""
        start = self.peek().span[0]
        end = start
        depth = 0
        stops = {";", "&", "&&", "||"} | (set() if through_pipes else {"|"})
        while True:
            tok = self.peek()
            if tok.kind in ("EOF", "NEWLINE") and depth == 0:
                break
            if tok.kind == "OP" and depth == 0 and (tok.text in stops or tok.text == ")"):
                break
            if tok.kind == "OP" and tok.text == "(":
                depth += 1
            elif tok.kind == "OP" and tok.text == ")":
                depth -= 1
            end = self.take().span[1]
        return Unparsed(self.text[start:end], span=(start, end))

    def unparsed_function(self) -> Unparsed:
        start = self.peek().span[0]
        self.take()  # name
        self.take()  # (
        if not self.at_op(")"):
            self.error("malformed function definition")
        self.take()
        self.skip_newlines()
        if self.peek().kind == "WORD" and self.peek().text == "{":
            node = self.unparsed_compound()
            return Unparsed(self.text[start:node.span[1]], span=(start, node.span[1]))
        node = self.unparsed_until_separator(through_pipes=True)
        end = max(node.span[1], start)
        return Unparsed(self.text[start:end], span=(start, end))

    def unparsed_compound(self) -> Unparsed:
        """Swallow a compound construct by matching its closing keyword.

        Keywords only count at command position, mirroring how the shell's
        own grammar treats reserved words.
        """
        start_tok = self.peek()
        start = start_tok.span[0]
        stack: list[str] = []
        cmdpos = True
        end = start
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                if stack:
                    self.error(
                        f"unterminated {stack[-1]!r} construct", start_tok
                    )
                break
            if tok.kind == "NEWLINE":
                cmdpos = True
                end = self.take().span[1]
                continue
            if tok.kind == "OP":
                if tok.text == "(":
                    stack.append("(")
                elif tok.text == ")":
                    if stack and stack[-1] == "(":
                        stack.pop()
                    elif not stack:
                        break  # belongs to an enclosing subshell
                cmdpos = True
                end = self.take().span[1]
                continue
            if tok.kind == "WORD" and cmdpos:
                word = tok.text
                if word in COMPOUND_OPENERS and word != "[[":
                    stack.append(word)
                elif word == "[[":
                    stack.append("[[")
                elif stack and word == COMPOUND_OPENERS.get(stack[-1] if stack[-1] != "(" else "", None):
                    stack.pop()
                    end = self.take().span[1]
                    if not stack:
                        for r in self.parse_redirections():
                            end = r.span[1]
                        break
                    cmdpos = False
                    continue
                elif word in ("then", "else", "elif", "do"):
                    pass  # stay at command position
                else:
                    cmdpos = False
                    end = self.take().span[1]
                    continue
                cmdpos = True
            else:
                cmdpos = False
            end = self.take().span[1]
        return Unparsed(self.text[start:end], span=(start, end))


def parse_script(text: str) -> Sequence:
    """Parse script text into an AST; out-of-subset constructs are preserved
    verbatim as Unparsed nodes."""
    return Parser(text).parse_script()
