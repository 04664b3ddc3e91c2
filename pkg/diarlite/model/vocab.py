"""Toy subword vocabulary.

Word-initial subwords carry the ``▁`` marker; continuation subwords do not.
The two specials are the speaker-change token and end-of-sequence, which
also serves as the decoder start symbol.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from diarlite.errors import DataError
from diarlite.utils.fileio import atomic_write_text

WORD_MARK = "▁"
EOS = "<eos>"
SC = "<sc>"
SPECIALS = (EOS, SC)

WORD_STARTS = (
    "the", "a", "red", "blue", "cat", "dog", "run", "see", "big", "old",
    "sun", "map", "box", "tree", "fish", "bird", "walk", "talk", "lamp", "door",
    "home", "rain",
)
CONTINUATIONS = ("s", "ing", "ed", "er", "y", "ly", "ful", "est")

DEFAULT_TOKENS = (
    list(SPECIALS)
    + [WORD_MARK + w for w in WORD_STARTS]
    + list(CONTINUATIONS)
)


class Vocabulary:
    """Ordered token list with stable indices."""

    def __init__(self, tokens: Sequence[str]) -> None:
        """Initialize the vocabulary.

        Args:
            tokens: Tokens in index order; must contain each special once.

        Raises:
            DataError: If a token repeats or a special is missing.
        """
        self.tokens: List[str] = list(tokens)
        self._index: Dict[str, int] = {}
        for i, token in enumerate(self.tokens):
            if token in self._index:
                raise DataError(f"Duplicate token '{token}' in vocabulary")
            self._index[token] = i
        for special in SPECIALS:
            if special not in self._index:
                raise DataError(f"Vocabulary is missing the special token {special}")
        self.eos_id = self._index[EOS]
        self.sc_id = self._index[SC]

    @classmethod
    def default(cls) -> "Vocabulary":
        return cls(DEFAULT_TOKENS)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError as e:
            raise DataError(f"Unknown token '{token}'") from e

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.index(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> List[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise DataError(f"Unknown token index {i}")
            out.append(self.tokens[i])
        return out

    def is_special(self, token_id: int) -> bool:
        return token_id in (self.eos_id, self.sc_id)

    def is_word_start(self, token_id: int) -> bool:
        return self.tokens[token_id].startswith(WORD_MARK)

    @property
    def word_start_ids(self) -> List[int]:
        return [i for i, t in enumerate(self.tokens) if t.startswith(WORD_MARK)]

    @property
    def continuation_ids(self) -> List[int]:
        return [
            i
            for i, t in enumerate(self.tokens)
            if not t.startswith(WORD_MARK) and t not in SPECIALS
        ]

    def save(self, path: Union[str, Path]) -> Path:
        """Write one token per line; specials are flagged with a trailing ``*``."""
        lines = [f"{t} *" if t in SPECIALS else t for t in self.tokens]
        return atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        """Read a vocabulary file written by :meth:`save`.

        Raises:
            DataError: If the file is unreadable or a flag is inconsistent.
        """
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise DataError(f"Unable to read vocabulary {path}: {e}") from e
        tokens = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            parts = line.split()
            token = parts[0]
            flagged = len(parts) > 1 and parts[1] == "*"
            if flagged != (token in SPECIALS):
                raise DataError(
                    f"{path}:{line_no}: special flag mismatch for '{token}'"
                )
            tokens.append(token)
        return cls(tokens)


def tokens_to_words(tokens: Iterable[str]) -> List[str]:
    """Join subword tokens into words, dropping specials.

    A continuation subword with no preceding word start becomes its own word.
    """
    words: List[str] = []
    current: Optional[str] = None
    for token in tokens:
        if token in SPECIALS:
            continue
        if token.startswith(WORD_MARK) or current is None:
            if current is not None:
                words.append(current)
            current = token[len(WORD_MARK):] if token.startswith(WORD_MARK) else token
        else:
            current += token
    if current is not None:
        words.append(current)
    return words
