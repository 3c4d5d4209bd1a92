#!/usr/bin/env python3
"""Generate data/toy_corpus_bn.txt: ~200 synthetic Bangla sentences.

Sentences are sampled from a tiny template grammar and kept only when every
4-token window inside them has a single continuation across the corpus, so
order-4 and order-5 datasets are fully determined. The first eight
sentences are a fixed "আমি ভাত খাই।" so short contexts have a clear answer.
"""
import random
import sys

SUBJECTS = ["আমি", "তুমি", "সে", "আমরা", "তারা", "রহিম", "করিম", "মা", "বাবা",
            "শিক্ষক", "ছাত্রটি", "কৃষক", "দাদা", "নানী", "বোন"]
OBJECTS = ["ভাত", "পানি", "বই", "চা", "গান", "ফুটবল", "চিঠি", "ছবি", "খবর",
           "মাছ", "রুটি", "কবিতা", "গল্প", "দুধ", "আম"]
VERBS = ["খাই", "পড়ি", "লিখি", "দেখি", "শুনি", "খেলি", "আনি", "কিনি", "রাঁধি",
         "বলি", "ভালোবাসি"]
TIMES = ["আজ", "কাল", "সকালে", "রাতে", "প্রতিদিন", "দুপুরে", "বিকেলে"]
PLACES = ["বাড়িতে", "স্কুলে", "মাঠে", "বাজারে", "ঢাকায়", "গ্রামে", "অফিসে"]
ADJS = ["ভালো", "নতুন", "পুরনো", "সুন্দর", "মিষ্টি", "বড়"]
QWORDS = ["কি", "কেন", "কখন", "কোথায়"]


def sentence(rng):
    kind = rng.random()
    s = rng.choice(SUBJECTS)
    o = rng.choice(OBJECTS)
    v = rng.choice(VERBS)
    if kind < 0.55:
        parts = [s]
        if rng.random() < 0.6:
            parts.append(rng.choice(TIMES))
        if rng.random() < 0.5:
            parts.append(rng.choice(PLACES))
        if rng.random() < 0.5:
            parts.append(rng.choice(ADJS))
        parts += [o, v, "।"]
    elif kind < 0.85:
        parts = [s, rng.choice(QWORDS)]
        if rng.random() < 0.5:
            parts.append(rng.choice(TIMES))
        parts += [o, v, "?"]
    else:
        parts = [rng.choice(TIMES), s, rng.choice(PLACES), o, v, "।"]
    return parts


def main():
    target = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    rng = random.Random(20240607)
    seen = {}
    # the running example used in the docs and tests: "আমি ভাত" -> "খাই"
    kept = [["আমি", "ভাত", "খাই", "।"]] * 8
    tries = 0
    while len(kept) < target and tries < 200000:
        tries += 1
        toks = sentence(rng)
        windows = [(tuple(toks[i:i + 4]), toks[i + 4]) for i in range(len(toks) - 4)]
        if any(ctx in seen and seen[ctx] != nxt for ctx, nxt in windows):
            continue
        for ctx, nxt in windows:
            seen[ctx] = nxt
        kept.append(toks)
    with open("data/toy_corpus_bn.txt", "w", encoding="utf-8") as f:
        for toks in kept:
            # danda attached to the last word, as in ordinary prose
            line = " ".join(toks[:-1]) + toks[-1]
            f.write(line + "\n")
    vocab = {t for s in kept for t in s}
    print(f"{len(kept)} sentences, {len(vocab)} distinct tokens, "
          f"{sum(len(s) for s in kept)} tokens")


if __name__ == "__main__":
    main()
