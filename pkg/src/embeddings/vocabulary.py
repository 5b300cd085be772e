"""
Closed token vocabulary with reserved padding and mask ids.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from ..utils.errors import LocovError


PAD_TOKEN = "[PAD]"
MASK_TOKEN = "[MASK]"
PAD_ID = 0
MASK_ID = 1


class Vocabulary:
    """Dense token ids 0..V-1; ``[PAD]`` is 0 and ``[MASK]`` is 1."""

    def __init__(self, tokens: Iterable[str]):
        words = [t for t in tokens if t not in (PAD_TOKEN, MASK_TOKEN)]
        self._tokens: List[str] = [PAD_TOKEN, MASK_TOKEN] + words
        self._ids: Dict[str, int] = {}
        for i, token in enumerate(self._tokens):
            if token in self._ids:
                raise LocovError("invalid-config", f"duplicate token {token!r}")
            if not token or any(c.isspace() for c in token):
                raise LocovError("invalid-config", f"token {token!r} is empty or contains whitespace")
            self._ids[token] = i

    @property
    def pad_id(self) -> int:
        return PAD_ID

    @property
    def mask_id(self) -> int:
        return MASK_ID

    @property
    def tokens(self) -> List[str]:
        return list(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def lookup(self, key: Union[str, int]) -> Union[int, str]:
        """String to id, or id to string."""
        if isinstance(key, str):
            if key not in self._ids:
                raise LocovError("unknown-token", repr(key))
            return self._ids[key]
        if not 0 <= key < len(self._tokens):
            raise LocovError("unknown-token", f"id {key} outside 0..{len(self._tokens) - 1}")
        return self._tokens[key]

    def encode(self, text: str) -> List[int]:
        """Whitespace tokenisation over the closed vocabulary."""
        return [self.lookup(word) for word in text.split()]

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.lookup(int(i)) for i in ids if int(i) != PAD_ID)

    def save(self, path: Union[str, Path]) -> None:
        """UTF-8 text, one token per line, in id order."""
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if lines[:2] != [PAD_TOKEN, MASK_TOKEN]:
            raise LocovError("invalid-config", f"{path} does not start with the reserved tokens")
        return cls(line for line in lines if line)


__all__ = ['Vocabulary', 'PAD_TOKEN', 'MASK_TOKEN', 'PAD_ID', 'MASK_ID']
