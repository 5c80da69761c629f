"""Per-frame target image selection over a candidate queue.

Each frame to be protected gets paired with the queue image it is least
similar to, which empirically speeds up the perturbation optimization
(the starting loss is large and the early gradient steps are productive).
From the second frame on, similarity to the previously chosen target is
added to the score, pushing consecutive frames toward different targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .codec import Frame, read_frames
from .embedder import EmbeddingVector, ImageEmbedder, sim


class EmptyQueueError(ValueError):
    """Target selection needs at least one candidate image."""


@dataclass
class TargetChoice:
    index: int
    score: float
    frame_index: int


class TargetQueue:
    """Candidate target frames, their embeddings precomputed once.

    The queue keeps the embedder that produced its embeddings so frame
    embeddings during selection come from the same network.
    """

    def __init__(self, images: list, embedder: ImageEmbedder):
        images = list(images)
        if not images:
            raise EmptyQueueError("target queue is empty")
        self.images = images
        self.embedder = embedder
        self.embeddings = [embedder.embed(f) for f in images]

    @classmethod
    def from_directory(cls, directory, embedder: ImageEmbedder) -> "TargetQueue":
        """Load every container file under a directory (sorted), all frames."""
        paths = sorted(Path(directory).glob("*.rvf"))
        frames: list[Frame] = []
        for p in paths:
            frames.extend(read_frames(p).frames)
        if not frames:
            raise EmptyQueueError(f"no target frames found under {directory}")
        return cls(frames, embedder)

    def __len__(self) -> int:
        return len(self.images)


def score(frame_emb: EmbeddingVector, candidate: int,
          prev_choice: TargetChoice | None, queue: TargetQueue) -> float:
    """Similarity score of one candidate; lower is a better target.

    First frame: cosine between frame and candidate. Later frames add the
    cosine between the candidate and the previous frame's chosen target.
    """
    s = sim(frame_emb, queue.embeddings[candidate])
    if prev_choice is not None:
        s += sim(queue.embeddings[prev_choice.index], queue.embeddings[candidate])
    return s


def select(frame, prev_choice: TargetChoice | None, queue: TargetQueue) -> TargetChoice:
    """Pick the argmin-score target; ties break to the lowest index."""
    frame_emb = queue.embedder.embed(frame)
    best_j = 0
    best_s = score(frame_emb, 0, prev_choice, queue)
    for j in range(1, len(queue)):
        s = score(frame_emb, j, prev_choice, queue)
        if s < best_s:
            best_j, best_s = j, s
    frame_index = 0 if prev_choice is None else prev_choice.frame_index + 1
    return TargetChoice(index=best_j, score=best_s, frame_index=frame_index)
