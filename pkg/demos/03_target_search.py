"""Target search: pick the least-similar queue image for every frame.

The score is plain cosine similarity of frame embeddings, plus, from the
second frame on, similarity to the previous frame's target. That second
term pushes consecutive frames toward different targets, which increases
flicker in whatever gets edited out of the protected video.
"""

from vidshield.embedder import ImageEmbedder
from vidshield.synthetic import gen_target_queue, gen_video
from vidshield.targets import TargetQueue, score, select

embedder = ImageEmbedder(seed=1)
queue = TargetQueue(gen_target_queue(7, 10, 64, 64), embedder)
video = gen_video(3, 5, 64, 64)

print("scores for frame 0 against the 10-image queue:")
frame_emb = embedder.embed(video.frames[0])
for j in range(len(queue)):
    print(f"  candidate {j}: {score(frame_emb, j, None, queue):+.4f}")

prev = None
print("\nchained selection over 5 frames:")
for i, frame in enumerate(video.frames):
    prev = select(frame, prev, queue)
    print(f"  frame {i}: target {prev.index}  score {prev.score:+.4f}")

print("\nwithout the diversity term every frame would pick independently;")
print("with it, repeating the previous target costs its self-similarity (+1).")
