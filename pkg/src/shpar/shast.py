"""Syntax tree for the supported POSIX shell subset.

Nodes keep the raw source text of every word, so unparsing reproduces a
script that behaves identically to the input.  Anything outside the subset
is wrapped in an Unparsed node and reproduced byte-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# Word parts: ('lit', text) | ('sq', text) | ('dq', [parts]) | ('var', name)
# | ('sub', raw-text).  'sub' covers $(...), `...` and $((...)), whose value
# is never known at compile time.
Part = tuple


@dataclass
class Word:
    raw: str
    parts: list[Part]
    span: tuple[int, int] = (0, 0)

    def __repr__(self) -> str:
        return f"Word({self.raw!r})"

    @property
    def is_literal(self) -> bool:
        """True when the word expands to a fixed string regardless of state."""
        return self.literal_value({}) is not None

    def literal_value(self, env: dict[str, str]) -> str | None:
        """Expanded value given known variable bindings, or None if unknown."""
        out: list[str] = []
        for part in self.parts:
            kind = part[0]
            if kind == "lit":
                text = part[1]
                if any(c in text for c in "*?[~"):
                    return None  # globs/tilde expand at runtime
                out.append(text)
            elif kind == "sq":
                out.append(part[1])
            elif kind == "dq":
                for sub in part[1]:
                    if sub[0] == "lit":
                        out.append(sub[1])
                    elif sub[0] == "var":
                        val = env.get(sub[1])
                        if val is None:
                            return None
                        out.append(val)
                    else:
                        return None
            elif kind == "var":
                val = env.get(part[1])
                if val is None:
                    return None
                out.append(val)
            else:
                return None
        return "".join(out)

    def variable_names(self) -> set[str]:
        names = set()
        for part in self.parts:
            if part[0] == "var":
                names.add(part[1])
            elif part[0] == "dq":
                for sub in part[1]:
                    if sub[0] == "var":
                        names.add(sub[1])
        return names


@dataclass
class Redirection:
    op: str  # '<', '>', '>>', '>&', '<&'
    target: Word
    fd: int | None = None
    span: tuple[int, int] = (0, 0)

    def render(self) -> str:
        fd = "" if self.fd is None else str(self.fd)
        return f"{fd}{self.op}{self.target.raw}"


@dataclass
class Node:
    span: tuple[int, int] = field(default=(0, 0), kw_only=True)


@dataclass
class SimpleCommand(Node):
    words: list[Word]
    redirections: list[Redirection] = field(default_factory=list)
    # `X=v cmd` prefix assignments, kept raw; their presence marks the
    # command as environment-dependent.
    prefix_assignments: list[Word] = field(default_factory=list)

    @property
    def name(self) -> str | None:
        return self.words[0].raw if self.words else None


@dataclass
class Assignment(Node):
    name: str
    value: Word


@dataclass
class Pipeline(Node):
    commands: list[Node]  # SimpleCommand | Subshell | Unparsed
    background: bool = False


@dataclass
class AndOr(Node):
    op: str  # '&&' | '||'
    left: Node
    right: Node


@dataclass
class Background(Node):
    child: Node


@dataclass
class Sequence(Node):
    items: list[Node]


@dataclass
class ForLoop(Node):
    var: str
    words: list[Word]
    body: Sequence
    redirections: list[Redirection] = field(default_factory=list)


@dataclass
class Subshell(Node):
    body: Sequence
    redirections: list[Redirection] = field(default_factory=list)


@dataclass
class Unparsed(Node):
    text: str


def unparse(node: Node | None) -> str:
    """Render a node back to executable script text."""
    if node is None:
        return ""
    if isinstance(node, Sequence):
        return "\n".join(unparse(item) for item in node.items)
    if isinstance(node, Background):
        return f"{unparse(node.child)} &"
    if isinstance(node, AndOr):
        return f"{unparse(node.left)} {node.op} {unparse(node.right)}"
    if isinstance(node, Pipeline):
        text = " | ".join(unparse(c) for c in node.commands)
        return f"{text} &" if node.background else text
    if isinstance(node, SimpleCommand):
        bits = [w.raw for w in node.prefix_assignments]
        bits += [w.raw for w in node.words]
        bits += [r.render() for r in node.redirections]
        return " ".join(bits)
    if isinstance(node, Assignment):
        return f"{node.name}={node.value.raw}"
    if isinstance(node, ForLoop):
        head = f"for {node.var} in {' '.join(w.raw for w in node.words)}; do"
        body = unparse(node.body)
        tail = "done" + "".join(" " + r.render() for r in node.redirections)
        return f"{head}\n{body}\n{tail}"
    if isinstance(node, Subshell):
        redirs = "".join(" " + r.render() for r in node.redirections)
        return f"( {unparse(node.body)} ){redirs}"
    if isinstance(node, Unparsed):
        return node.text
    raise TypeError(f"cannot unparse {type(node).__name__}")


def walk(node: Node):
    """Yield node and all descendants, depth first."""
    yield node
    if isinstance(node, Sequence):
        for item in node.items:
            yield from walk(item)
    elif isinstance(node, Background):
        yield from walk(node.child)
    elif isinstance(node, AndOr):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Pipeline):
        for c in node.commands:
            yield from walk(c)
    elif isinstance(node, ForLoop):
        yield from walk(node.body)
    elif isinstance(node, Subshell):
        yield from walk(node.body)


def iter_commands(node: Node):
    """Yield every SimpleCommand in the tree."""
    for n in walk(node):
        if isinstance(n, SimpleCommand):
            yield n
