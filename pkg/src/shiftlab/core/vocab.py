"""Word-level vocabulary with fixed special tokens.

Specials occupy the lowest ids so PAD can stay 0 and masks stay cheap.
One placeholder token exists per modality; it marks where projected
modality embeddings are spliced into the LM input.
"""
from __future__ import annotations

from pathlib import Path

from .text import normalize
from .types import Modality

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
SEP = "<sep>"

PLACEHOLDER = {
    Modality.IMG: "<img>",
    Modality.AUD: "<aud>",
    Modality.VID: "<vid>",
}

SPECIALS = (
    PAD,
    BOS,
    EOS,
    SEP,
    PLACEHOLDER[Modality.IMG],
    PLACEHOLDER[Modality.AUD],
    PLACEHOLDER[Modality.VID],
)


class OutOfVocabularyError(KeyError):
    def __init__(self, token: str):
        super().__init__(token)
        self.token = token

    def __str__(self) -> str:
        return f"token not in vocabulary: {self.token!r}"


class Vocabulary:
    def __init__(self, tokens: list[str]):
        if tokens[: len(SPECIALS)] != list(SPECIALS):
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self._tokens = list(tokens)
        self._ids = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    @property
    def bos_id(self) -> int:
        return self._ids[BOS]

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    @property
    def sep_id(self) -> int:
        return self._ids[SEP]

    def placeholder_id(self, modality: Modality) -> int:
        return self._ids[PLACEHOLDER[modality]]

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise OutOfVocabularyError(token) from None

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, text: str) -> list[int]:
        """Normalize then map each word; error names the offending token."""
        return [self.id_of(w) for w in normalize(text).split()]

    def decode(self, ids: list[int]) -> str:
        """Inverse of encode; special tokens are dropped, not rendered."""
        specials = set(range(len(SPECIALS)))
        return " ".join(self._tokens[i] for i in ids if i not in specials)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln for ln in lines if ln])

    def content_tokens(self) -> list[str]:
        return self._tokens[len(SPECIALS) :]


def build_vocabulary(corpus: list[str]) -> Vocabulary:
    """Specials first, then corpus words in first-appearance order."""
    if not corpus:
        raise ValueError("empty corpus")
    tokens = list(SPECIALS)
    seen = set(tokens)
    for line in corpus:
        for word in normalize(line).split():
            if word not in seen:
                seen.add(word)
                tokens.append(word)
    return Vocabulary(tokens)
