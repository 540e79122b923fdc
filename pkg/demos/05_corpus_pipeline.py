#!/usr/bin/env python3
"""The corpus-construction pipeline end to end, on synthetic ratings.

Covers sentence-class voting, task subset assembly with dummy injection,
spammer filtering, the exactly-ten intensity aggregation, and summary tables.
"""

import numpy as np

from shoutkit.corpus import (RatingRecord, SentenceVote, aggregate_ratings_pipeline,
                             classify_sentence_votes, filter_spammers,
                             make_rating_subsets)

# Five raters vote each sentence into H / L / H-or-L; ties go to H/L.
for votes in [(4, 1, 0), (1, 3, 1), (2, 2, 1), (0, 1, 4)]:
    vote = SentenceVote(1, *votes)
    print(f"votes H={votes[0]} L={votes[1]} H/L={votes[2]} -> {classify_sentence_votes(vote)}")

# 40 shouted items split into 2 tasks of 20, each with one dummy slot.
items = [f"utt{i:03d}" for i in range(40)]
subsets = make_rating_subsets(items, seed=4)
print(f"\n{len(subsets)} tasks of 21 slots; task 1 dummy at position "
      f"{subsets[0].dummy_position}")

# 12 workers per task; every sixth worker rates the dummy as a shout and is
# dropped with all of their responses for that task.
rng = np.random.default_rng(8)
ratings = []
for subset in subsets:
    for w in range(12):
        scores = list(rng.integers(2, 8, size=21))
        scores[subset.dummy_position] = 1 if w % 6 else 4
        ratings.append(RatingRecord(worker_id=f"w{w:02d}", subset_id=subset.subset_id,
                                    scores=tuple(int(s) for s in scores),
                                    dummy_index=subset.dummy_position))
kept = filter_spammers(ratings)
print(f"{len(ratings)} task responses, {len(kept)} kept after the dummy filter")

# Ten ratings per item, chosen under a seed, averaged into the intensity.
labels = aggregate_ratings_pipeline(ratings, subsets, seed=99)
sample = items[0]
label = labels[sample]
print(f"\n{sample}: ratings {label.contributing_ratings} -> "
      f"intensity {label.mean_score:.2f}")
means = [l.mean_score for l in labels.values()]
print(f"{len(labels)} items labeled; intensity range "
      f"[{min(means):.2f}, {max(means):.2f}]")
