import subprocess

import pytest

from shpar.parser import ShellParseError, Parser, parse_script
from shpar.shast import (
    AndOr,
    Assignment,
    Background,
    ForLoop,
    Pipeline,
    SimpleCommand,
    Subshell,
    Unparsed,
    iter_commands,
    unparse,
    walk,
)

from conftest import bash


def names(node):
    return [c.name for c in iter_commands(node)]


def test_fig4_shape():
    ast = parse_script('cat f1 f2 | grep "foo" > f3 && sort f3')
    assert len(ast.items) == 1
    andor = ast.items[0]
    assert isinstance(andor, AndOr) and andor.op == "&&"
    assert isinstance(andor.left, Pipeline)
    assert [c.name for c in andor.left.commands] == ["cat", "grep"]
    assert andor.left.commands[1].redirections[0].op == ">"
    assert isinstance(andor.right, Pipeline)
    assert names(andor.right) == ["sort"]


def test_empty_script():
    ast = parse_script("")
    assert ast.items == []
    assert unparse(ast) == ""


def test_assignment_then_use():
    ast = parse_script("x=5; echo $x")
    assert isinstance(ast.items[0], Assignment)
    assert ast.items[0].name == "x"
    assert ast.items[0].value.raw == "5"
    assert isinstance(ast.items[1], Pipeline)
    assert names(ast.items[1]) == ["echo"]


def test_background_and_sequence():
    ast = parse_script("sleep 1 & echo hi\ntrue && false || echo x &")
    p1, p2, bg = ast.items
    assert isinstance(p1, Pipeline) and p1.background
    assert isinstance(p2, Pipeline) and not p2.background
    assert isinstance(bg, Background)
    assert isinstance(bg.child, AndOr)


def test_redirections_with_fds():
    ast = parse_script("grep x f 2> err.log > out.log < in.txt")
    cmd = ast.items[0].commands[0]
    ops = [(r.fd, r.op) for r in cmd.redirections]
    assert ops == [(2, ">"), (None, ">"), (None, "<")]


def test_for_loop():
    ast = parse_script("for y in a b c; do\n  echo $y | tr a b\ndone")
    loop = ast.items[0]
    assert isinstance(loop, ForLoop)
    assert loop.var == "y"
    assert [w.raw for w in loop.words] == ["a", "b", "c"]
    assert names(loop.body) == ["echo", "tr"]


def test_subshell():
    ast = parse_script("( cat a; cat b ) > out")
    sub = ast.items[0]
    assert isinstance(sub, Subshell)
    assert names(sub.body) == ["cat", "cat"]
    assert sub.redirections[0].op == ">"


@pytest.mark.parametrize("src", [
    "if true; then echo a; fi",
    "while read l; do echo $l; done < f",
    "case $x in a) echo 1;; *) echo 2;; esac",
    "{ echo grouped; }",
    "f() { echo b; }",
    "! grep -q x f",
])
def test_out_of_subset_becomes_unparsed(src):
    ast = parse_script(src)
    unparsed = [n for n in walk(ast) if isinstance(n, Unparsed)]
    assert unparsed, f"expected Unparsed node for {src!r}"
    # verbatim preservation
    assert src.strip() in unparse(ast)


def test_unparsed_compound_keeps_following_statements():
    ast = parse_script("if true; then echo a; fi\necho after")
    assert isinstance(ast.items[0], Unparsed)
    assert names(ast.items[1]) == ["echo"]


def test_compound_in_pipeline_position():
    ast = parse_script("if true; then cat f; fi | sort")
    pipe = ast.items[0]
    assert isinstance(pipe, Pipeline)
    assert isinstance(pipe.commands[0], Unparsed)
    assert pipe.commands[1].name == "sort"


def test_heredoc_is_preserved_verbatim():
    src = "cat <<EOF\nhello\nEOF\necho tail"
    ast = parse_script(src)
    assert any(isinstance(n, Unparsed) for n in walk(ast))
    assert "EOF" in unparse(ast)


def test_parse_error_reports_position():
    with pytest.raises(ShellParseError) as info:
        parse_script("echo 'unterminated\necho next")
    assert info.value.line == 1
    with pytest.raises(ShellParseError):
        parse_script("grep x f >")


def test_word_quoting_and_variables():
    ast = parse_script("""grep "fo o" 'b ar' $v ${w} $(date) x\\ y""")
    words = ast.items[0].commands[0].words
    assert [w.raw for w in words][0] == "grep"
    assert words[1].literal_value({}) == "fo o"
    assert words[2].literal_value({}) == "b ar"
    assert words[3].literal_value({}) is None
    assert words[3].literal_value({"v": "V"}) == "V"
    assert words[4].literal_value({"w": "W"}) == "W"
    assert words[5].literal_value({"anything": "x"}) is None  # cmdsub
    assert words[6].literal_value({}) == "x y"


def test_glob_words_are_not_literal():
    ast = parse_script("grep x *.txt")
    star = ast.items[0].commands[0].words[2]
    assert star.literal_value({}) is None


def test_every_token_is_owned():
    src = ("x=5; cat f1 f2 | grep foo > out && sort out\n"
           "for i in 1 2; do echo $i; done\n"
           "if true; then echo a; fi\n")
    parser = Parser(src)
    parser.parse_script()
    consumed = parser.idx
    assert consumed == len(parser.toks) - 1  # everything but EOF


ROUND_TRIP_SCRIPTS = [
    "echo hello world",
    "printf 'a\\nb\\n' | grep a",
    "x=abc; echo $x; echo \"$x!\"",
    "printf '2\\n1\\n3\\n' | sort | head -n 2",
    "echo start; (echo inner; echo deep) | tr a-z A-Z; echo done",
    "for i in 1 2 3; do echo \"i=$i\"; done",
    "true && echo yes || echo no",
    "echo bg & wait",
    "if true; then echo branch; fi",
    "printf 'x\\ny\\n' > f.txt; cat f.txt; rm f.txt",
    "echo one 2> err.io; cat err.io 2> /dev/null; true",
]


@pytest.mark.parametrize("src", ROUND_TRIP_SCRIPTS)
def test_round_trip_executes_identically(src, tmp_path):
    rendered = unparse(parse_script(src))
    a = bash(src, cwd=tmp_path)
    b = bash(rendered, cwd=tmp_path)
    assert b.stdout == a.stdout
    assert b.returncode == a.returncode


def test_round_trip_temperature_style_loop(tmp_path):
    (tmp_path / "d2015").write_text("30\n999\n12\n")
    (tmp_path / "d2016").write_text("5\n41\n999\n")
    src = (
        'base="d";\n'
        "for y in 2015 2016; do\n"
        "  cat $base$y | grep -v 999 | sort -rn | head -n 1 |"
        ' sed "s/^/max for $y is /"\n'
        "done\n"
    )
    rendered = unparse(parse_script(src))
    a = bash(src, cwd=tmp_path)
    b = bash(rendered, cwd=tmp_path)
    assert a.returncode == 0
    assert b.stdout == a.stdout
