"""
Strictly binary trees over leaf indices 0..n-1.
File: apps/trees/structures.py

A tree is built from Leaf and Internal nodes. Every Internal node carries its
span (first leaf, last leaf); the constructor rejects children whose spans are
not adjacent, so contiguity holds for every tree that can be built.

Bracketed form: a leaf is its decimal index, an internal node is
"( left right )" with single spaces, e.g. "( ( 0 1 ) 2 )".
"""

from dataclasses import dataclass, field

from apps.core.exceptions import TreeError


@dataclass(frozen=True)
class Leaf:
    index: int

    @property
    def span(self):
        return (self.index, self.index)


@dataclass(frozen=True)
class Internal:
    left: object
    right: object
    span: tuple = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.left.span[1] + 1 != self.right.span[0]:
            raise TreeError(f'children spans {self.left.span} and {self.right.span} are not adjacent')
        object.__setattr__(self, 'span', (self.left.span[0], self.right.span[1]))


def leaf_count(tree):
    return tree.span[1] - tree.span[0] + 1


def iter_nodes(tree):
    """Pre-order traversal without recursion."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Internal):
            stack.append(node.right)
            stack.append(node.left)


def leaves(tree):
    return [node.index for node in iter_nodes(tree) if isinstance(node, Leaf)]


def spans(tree):
    """Spans of all internal nodes, root included, single leaves excluded."""
    return frozenset(node.span for node in iter_nodes(tree) if isinstance(node, Internal))


def height(tree):
    """Edges on the longest root-to-leaf path; a single leaf has height 0."""
    best = 0
    stack = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        if isinstance(node, Internal):
            stack.append((node.left, depth + 1))
            stack.append((node.right, depth + 1))
        else:
            best = max(best, depth)
    return best


def validate_tree(tree):
    """
    Check every tree invariant and return the leaf count.

    Leaves must be exactly 0..n-1 in left-to-right order and the tree must
    have n-1 internal nodes.
    """
    order = leaves(tree)
    if order != list(range(len(order))):
        raise TreeError(f'leaves are not 0..{len(order) - 1} in order: {order}')
    internal = sum(1 for node in iter_nodes(tree) if isinstance(node, Internal))
    if internal != len(order) - 1:
        raise TreeError(f'{internal} internal nodes for {len(order)} leaves')
    return len(order)


def from_merge_trace(n, trace):
    """
    Build the tree produced by merging adjacent frontier nodes.

    At step t the frontier holds n - t nodes and trace[t] picks the pair
    (trace[t], trace[t] + 1) to replace with its parent.
    """
    if n < 1:
        raise TreeError(f'a tree needs at least one leaf, got n={n}')
    trace = list(trace)
    if len(trace) != n - 1:
        raise TreeError(f'a trace over {n} leaves has {n - 1} steps, got {len(trace)}')

    frontier = [Leaf(i) for i in range(n)]
    for step, choice in enumerate(trace):
        if not 0 <= choice <= len(frontier) - 2:
            raise TreeError(
                f'choice {choice} outside 0..{len(frontier) - 2}', position=f'step {step}'
            )
        frontier[choice:choice + 2] = [Internal(frontier[choice], frontier[choice + 1])]
    return frontier[0]


def to_bracketed(tree, marked=frozenset()):
    """
    Serialize a tree. Internal nodes whose span is in `marked` open with "(*"
    instead of "(" (display only, not accepted by parse_bracketed).
    """
    tokens = []
    stack = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            tokens.append(item)
        elif isinstance(item, Leaf):
            tokens.append(str(item.index))
        else:
            tokens.append('(*' if item.span in marked else '(')
            stack.extend([')', item.right, item.left])
    return ' '.join(tokens)


def parse_bracketed(text):
    """Parse the bracketed grammar exactly; errors report the character offset."""
    if not text:
        raise TreeError('empty tree string', position=0)

    tokens = []
    offset = 0
    for token in text.split(' '):
        if token not in ('(', ')') and not (token.isascii() and token.isdigit() and str(int(token)) == token):
            raise TreeError(f'unexpected token {token!r}', position=offset)
        tokens.append((token, offset))
        offset += len(token) + 1

    _check_leaf_sequence([(int(token), position) for token, position in tokens if token not in ('(', ')')])

    stack = [[]]
    for token, position in tokens:
        if token == '(':
            stack.append([])
        elif token == ')':
            if len(stack) == 1:
                raise TreeError('unbalanced ")"', position=position)
            children = stack.pop()
            if len(children) != 2:
                raise TreeError(f'internal node needs 2 children, found {len(children)}', position=position)
            stack[-1].append(Internal(*children))
        else:
            stack[-1].append(Leaf(int(token)))

    if len(stack) != 1:
        raise TreeError('unbalanced "(": missing ")"', position=len(text))
    if len(stack[0]) != 1:
        raise TreeError(f'expected a single tree, found {len(stack[0])}', position=len(text))
    return stack[0][0]


def _check_leaf_sequence(leaf_positions):
    """Leaves must read 0, 1, 2, ... from left to right."""
    seen = {index for index, _ in leaf_positions}
    visited = set()
    for expected, (index, position) in enumerate(leaf_positions):
        if index == expected:
            visited.add(index)
            continue
        if index in visited:
            raise TreeError(f'duplicate leaf {index}', position=position)
        if expected not in seen:
            raise TreeError(f'leaf {expected} missing', position=position)
        raise TreeError(f'leaf {index} out of order, expected {expected}', position=position)
    if not leaf_positions:
        raise TreeError('tree has no leaves', position=0)
