#!/usr/bin/env python3
"""Regenerate the committed datasets under data/.

tic_tac_toe: complete enumeration of terminal boards of tic-tac-toe with x
moving first (the classic endgame dataset: 958 boards, 626 x-wins).  The
enumeration walks every legal game to its end and collects distinct final
boards, so the output is exact, not sampled.

wine: exported from scikit-learn's bundled copy of the classic 178x13
chemical-analysis dataset (3 cultivars).  scikit-learn is only needed to
regenerate this file; the CSV itself is committed.
"""

import os
import sys

OUT = os.path.join(os.path.dirname(__file__), os.pardir, "data")

LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),   # rows
    (0, 3, 6), (1, 4, 7), (2, 5, 8),   # columns
    (0, 4, 8), (2, 4, 6),              # diagonals
)

SQUARES = (
    "top-left-square", "top-middle-square", "top-right-square",
    "middle-left-square", "middle-middle-square", "middle-right-square",
    "bottom-left-square", "bottom-middle-square", "bottom-right-square",
)


def winner(board):
    for a, b, c in LINES:
        if board[a] != "b" and board[a] == board[b] == board[c]:
            return board[a]
    return None


def enumerate_terminals():
    """DFS over all legal games (x first); return the set of final boards."""
    terminals = set()

    def play(board, player):
        w = winner(board)
        if w is not None or "b" not in board:
            terminals.add(tuple(board))
            return
        for i in range(9):
            if board[i] == "b":
                board[i] = player
                play(board, "o" if player == "x" else "x")
                board[i] = "b"

    play(["b"] * 9, "x")
    return terminals


def write_tic_tac_toe():
    boards = sorted(enumerate_terminals())
    rows = [(b, "positive" if winner(b) == "x" else "negative") for b in boards]
    pos = sum(1 for _, y in rows if y == "positive")
    assert len(rows) == 958, len(rows)
    assert pos == 626, pos

    with open(os.path.join(OUT, "tic_tac_toe.csv"), "w") as f:
        f.write(",".join(SQUARES) + ",class\n")
        for b, y in rows:
            f.write(",".join(b) + "," + y + "\n")
    with open(os.path.join(OUT, "tic_tac_toe.schema"), "w") as f:
        for name in SQUARES:
            f.write(f"{name},discrete,x,o,b\n")
        f.write("class,label,negative,positive\n")
    print(f"tic_tac_toe: {len(rows)} rows, {pos} positive, {len(rows) - pos} negative")


def write_wine():
    from sklearn.datasets import load_wine

    wine = load_wine()
    names = [n.replace(",", "_") for n in wine.feature_names]
    counts = [int((wine.target == k).sum()) for k in range(3)]
    assert wine.data.shape == (178, 13), wine.data.shape
    assert counts == [59, 71, 48], counts

    with open(os.path.join(OUT, "wine.csv"), "w") as f:
        f.write(",".join(names) + ",class\n")
        for x, y in zip(wine.data, wine.target):
            f.write(",".join(repr(float(v)) for v in x) + f",class_{y}\n")
    with open(os.path.join(OUT, "wine.schema"), "w") as f:
        for name in names:
            f.write(f"{name},continuous\n")
        f.write("class,label,class_0,class_1,class_2\n")
    print(f"wine: 178 rows, class counts {counts}")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    write_tic_tac_toe()
    try:
        write_wine()
    except ImportError:
        print("wine: scikit-learn not available, skipped", file=sys.stderr)
