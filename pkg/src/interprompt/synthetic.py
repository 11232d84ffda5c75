"""Deterministic synthetic posts with the dataset schema, for offline tests and demos.

The sentences are invented and carry no real user content.
"""

from __future__ import annotations

import random
import re

from .corpus import ContingencyTable, Post

# cue -> sentence frames that embed it verbatim
TBE_SENTENCES = {
    "feel so alone": ("i {}", "lately i {}"),
    "nobody talks to me": ("{}", "honestly {}"),
    "have no friends left": ("i {}", "i think i {}"),
    "completely isolated from people": ("i am {}", "i feel {}"),
    "left out of everything": ("i am {}", "i always get {}"),
    "lonely every single night": ("i am {}", "i get {}"),
}
PBU_SENTENCES = {
    "burden to everyone": ("i am a {}", "i feel like a {}"),
    "better off without me": ("they would be {}", "my family would be {}"),
    "useless to my family": ("i am {}", "i feel {}"),
    "only cause problems": ("i {}", "all i do is {}"),
    "dragging everyone down": ("i am {}", "i keep {}"),
    "waste of their time": ("i am a {}", "i feel like a {}"),
}
TBE_CUES = tuple(TBE_SENTENCES)
PBU_CUES = tuple(PBU_SENTENCES)
NEUTRAL = (
    "work was long today",
    "i went for a walk after lunch",
    "the weather has been grey",
    "my exams start next week",
    "i cooked dinner tonight",
    "we watched an old movie",
    "the bus was late again",
    "i started reading a new book",
)

# Published label counts of the full IRF dataset, ordered (n00, n01, n10, n11).
IRF_COUNTS = (1123, 472, 1252, 675)
# Largest-remainder allocation of IRF_COUNTS to 60 posts.
FIXTURE_COUNTS = (19, 8, 21, 12)


def synthetic_posts(counts=FIXTURE_COUNTS, seed: int = 0, prefix: str = "fx") -> list[Post]:
    """Posts whose (TBe, PBu) contingency table equals ``counts`` = (n00, n01, n10, n11)."""
    if isinstance(counts, ContingencyTable):
        counts = (counts.n00, counts.n01, counts.n10, counts.n11)
    rng = random.Random(seed)
    labels = []
    for (tbe, pbu), n in zip(((0, 0), (0, 1), (1, 0), (1, 1)), counts):
        labels.extend([(tbe, pbu)] * n)
    rng.shuffle(labels)
    width = max(4, len(str(len(labels))))
    posts = []
    for i, (tbe, pbu) in enumerate(labels, start=1):
        sentences = rng.sample(NEUTRAL, rng.randint(1, 2))
        tbe_cue = pbu_cue = None
        if tbe:
            tbe_cue = rng.choice(TBE_CUES)
            sentences.append(rng.choice(TBE_SENTENCES[tbe_cue]).format(tbe_cue))
        if pbu:
            pbu_cue = rng.choice(PBU_CUES)
            sentences.append(rng.choice(PBU_SENTENCES[pbu_cue]).format(pbu_cue))
        rng.shuffle(sentences)
        text = ". ".join(s[0].upper() + s[1:] for s in sentences) + "."
        text = re.sub(r"\bi\b", "I", text)
        posts.append(Post(f"{prefix}-{i:0{width}d}", text, tbe, pbu, tbe_cue, pbu_cue))
    return posts
