"""Seed dictionaries: ordered (source, target) pairs and their file format
(one pair per line, whitespace separated; a source may repeat)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class SeedDictionary:
    pairs: list[tuple[str, str]]

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def by_source(self) -> dict[str, list[str]]:
        """Targets grouped per source, first-seen order, duplicates removed."""
        grouped: dict[str, list[str]] = {}
        for src, tgt in self.pairs:
            bucket = grouped.setdefault(src, [])
            if tgt not in bucket:
                bucket.append(tgt)
        return grouped


def load_dictionary(path, lowercase: bool = False) -> SeedDictionary:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise ValueError(
                    f"{path}: line {lineno}: expected 'source target', got {len(fields)} fields"
                )
            src, tgt = fields
            if lowercase:
                src, tgt = src.lower(), tgt.lower()
            pairs.append((src, tgt))
    return SeedDictionary(pairs)


def save_dictionary(dictionary: SeedDictionary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for src, tgt in dictionary.pairs:
            f.write(f"{src}\t{tgt}\n")
