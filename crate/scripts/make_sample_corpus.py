#!/usr/bin/env python3
"""Regenerates data/sample: a synthetic drama corpus with planted topic drift.

60 token-annotated "plays" between 1700 and 1900 mix four themes. Two are
stable. The court theme falls and the household-economy theme rises, with an
abrupt switch at 1800. Function words, light verbs, address terms and
one-off character names are mixed in so that preprocessing has work to do.

Also writes a synthetic GDP-like annual series. Output is deterministic.
"""

import json
import math
import random
from pathlib import Path

SEED = 1789
CHANGEPOINT = 1800
OUT = Path(__file__).resolve().parent.parent / "data" / "sample"

THEMES = {
    "court": [
        ("roi", "NOUN"), ("reine", "NOUN"), ("prince", "NOUN"), ("princesse", "NOUN"), ("trône", "NOUN"),
        ("couronne", "NOUN"), ("gloire", "NOUN"), ("honneur", "NOUN"), ("noblesse", "NOUN"), ("duc", "NOUN"),
        ("comte", "NOUN"), ("marquis", "NOUN"), ("épée", "NOUN"), ("palais", "NOUN"), ("héros", "NOUN"),
        ("vertu", "NOUN"), ("sceptre", "NOUN"), ("empire", "NOUN"), ("destin", "NOUN"), ("vengeance", "NOUN"),
        ("serment", "NOUN"), ("chevalier", "NOUN"), ("courtisan", "NOUN"), ("majesté", "NOUN"), ("tyran", "NOUN"),
        ("ancêtre", "NOUN"), ("rang", "NOUN"), ("naissance", "NOUN"), ("noble", "ADJ"), ("royal", "ADJ"),
        ("illustre", "ADJ"), ("auguste", "ADJ"), ("glorieux", "ADJ"), ("régner", "VERB"), ("combattre", "VERB"),
        ("venger", "VERB"),
    ],
    "household": [
        ("argent", "NOUN"), ("franc", "NOUN"), ("dot", "NOUN"), ("héritage", "NOUN"), ("commerce", "NOUN"),
        ("marchand", "NOUN"), ("banque", "NOUN"), ("affaire", "NOUN"), ("fortune", "NOUN"), ("dette", "NOUN"),
        ("créancier", "NOUN"), ("notaire", "NOUN"), ("contrat", "NOUN"), ("usine", "NOUN"), ("ouvrier", "NOUN"),
        ("salaire", "NOUN"), ("loyer", "NOUN"), ("boutique", "NOUN"), ("ménage", "NOUN"), ("rente", "NOUN"),
        ("intérêt", "NOUN"), ("billet", "NOUN"), ("caisse", "NOUN"), ("bureau", "NOUN"), ("patron", "NOUN"),
        ("employé", "NOUN"), ("comptoir", "NOUN"), ("capital", "NOUN"), ("prix", "NOUN"), ("marché", "NOUN"),
        ("bourgeois", "ADJ"), ("riche", "ADJ"), ("ruiné", "ADJ"), ("payer", "VERB"), ("acheter", "VERB"),
        ("vendre", "VERB"),
    ],
    "love": [
        ("amour", "NOUN"), ("cœur", "NOUN"), ("amant", "NOUN"), ("maîtresse", "NOUN"), ("baiser", "NOUN"),
        ("mariage", "NOUN"), ("rival", "NOUN"), ("jalousie", "NOUN"), ("soupir", "NOUN"), ("charme", "NOUN"),
        ("beauté", "NOUN"), ("lettre", "NOUN"), ("promesse", "NOUN"), ("tendresse", "NOUN"), ("larme", "NOUN"),
        ("bonheur", "NOUN"), ("aveu", "NOUN"), ("caprice", "NOUN"), ("feu", "NOUN"), ("regard", "NOUN"),
        ("charmant", "ADJ"), ("tendre", "ADJ"), ("jaloux", "ADJ"), ("fidèle", "ADJ"), ("cruel", "ADJ"),
        ("aimer", "VERB"), ("plaire", "VERB"), ("épouser", "VERB"), ("soupirer", "VERB"), ("adorer", "VERB"),
    ],
    "everyday": [
        ("valet", "NOUN"), ("servante", "NOUN"), ("maître", "NOUN"), ("porte", "NOUN"), ("chambre", "NOUN"),
        ("jardin", "NOUN"), ("table", "NOUN"), ("dîner", "NOUN"), ("souper", "NOUN"), ("chapeau", "NOUN"),
        ("manteau", "NOUN"), ("voiture", "NOUN"), ("rue", "NOUN"), ("ville", "NOUN"), ("campagne", "NOUN"),
        ("soir", "NOUN"), ("matin", "NOUN"), ("nouvelle", "NOUN"), ("fenêtre", "NOUN"), ("escalier", "NOUN"),
        ("clef", "NOUN"), ("salon", "NOUN"), ("lampe", "NOUN"), ("voisin", "NOUN"), ("entrer", "VERB"),
        ("sortir", "VERB"), ("attendre", "VERB"), ("courir", "VERB"), ("frapper", "VERB"), ("vite", "ADV"),
    ],
}

# Mean theme weights before and after the changepoint; each play draws its
# own mixture from a Dirichlet with these means and concentration MIX_CONCENTRATION.
MIX_BEFORE = {"court": 0.60, "household": 0.05, "love": 0.20, "everyday": 0.15}
MIX_AFTER = {"court": 0.05, "household": 0.60, "love": 0.20, "everyday": 0.15}
MIX_CONCENTRATION = 20.0

FUNCTION_WORDS = [
    ("le", "le", "DET"), ("la", "le", "DET"), ("les", "le", "DET"), ("un", "un", "DET"), ("une", "un", "DET"),
    ("de", "de", "ADP"), ("du", "de", "ADP"), ("à", "à", "ADP"), ("et", "et", "CCONJ"), ("mais", "mais", "CCONJ"),
    ("que", "que", "SCONJ"), ("je", "je", "PRON"), ("vous", "vous", "PRON"), ("il", "il", "PRON"),
    ("ne", "ne", "ADV"), ("pas", "pas", "ADV"), ("bien", "bien", "ADV"), ("oh", "oh", "INTJ"),
]
LIGHT_VERBS = [
    ("est", "être", "AUX"), ("suis", "être", "VERB"), ("a", "avoir", "AUX"), ("ai", "avoir", "VERB"),
    ("fait", "faire", "VERB"), ("dit", "dire", "VERB"), ("va", "aller", "VERB"), ("vient", "venir", "VERB"),
    ("voit", "voir", "VERB"), ("peut", "pouvoir", "VERB"), ("veux", "vouloir", "VERB"), ("sais", "savoir", "VERB"),
    ("faut", "falloir", "VERB"), ("dois", "devoir", "VERB"), ("monsieur", "monsieur", "NOUN"),
    ("madame", "madame", "NOUN"), ("mademoiselle", "mademoiselle", "NOUN"),
]
NAME_SYLLABLES = ["al", "bé", "cé", "dor", "é", "fla", "gé", "hor", "is", "ju", "lé", "mar", "nor", "or", "pé", "ro",
                  "sé", "ti", "val", "zé"]


def zipf_weights(n, s=0.8):
    w = [1.0 / (r + 1) ** s for r in range(n)]
    total = sum(w)
    return [x / total for x in w]


def inflect(lemma, pos, rng):
    """A plausible surface form; the lemma stays the annotation."""
    if pos == "NOUN" and rng.random() < 0.3 and not lemma.endswith(("s", "x")):
        return lemma + "s"
    if pos == "VERB" and lemma.endswith("er") and rng.random() < 0.5:
        return lemma[:-2] + rng.choice(["e", "ez", "ons", "é"])
    return lemma


def dirichlet(means, rng):
    draws = {k: rng.gammavariate(MIX_CONCENTRATION * m, 1.0) for k, m in means.items()}
    total = sum(draws.values())
    return {k: v / total for k, v in draws.items()}


def make_play(index, year, rng):
    mix = dirichlet(MIX_BEFORE if year < CHANGEPOINT else MIX_AFTER, rng)
    themes = list(mix)
    n_content = rng.randint(320, 420)
    tokens = []
    for _ in range(n_content):
        theme = rng.choices(themes, weights=[mix[t] for t in themes])[0]
        words = THEMES[theme]
        lemma, pos = rng.choices(words, weights=zipf_weights(len(words)))[0]
        tokens.append([inflect(lemma, pos, rng), lemma, pos])
    for _ in range(int(n_content * 0.8)):
        tokens.append(list(rng.choice(FUNCTION_WORDS)))
    for _ in range(int(n_content * 0.15)):
        tokens.append(list(rng.choice(LIGHT_VERBS)))
    names = ["".join(rng.choice(NAME_SYLLABLES) for _ in range(3)).capitalize() for _ in range(3)]
    for _ in range(12):
        name = rng.choice(names)
        tokens.append([name, name, "PROPN"])
    rng.shuffle(tokens)
    title = f"Pièce {index + 1:02d}"
    return {"id": f"sample{index + 1:03d}", "year": year, "title": title, "tokens": tokens}


def play_years(rng):
    before = rng.sample(range(1700, CHANGEPOINT), 30)
    after = rng.sample(range(CHANGEPOINT, 1901), 30)
    return sorted(before + after)


def gdp_rows():
    rows = []
    for year in range(1700, 1901, 10):
        growth = 0.001 * (year - 1700) + (0.008 * (year - 1820) if year > 1820 else 0.0)
        france = round(1100 * math.exp(growth))
        # sparse early record, as in historical series
        if year in (1710, 1730, 1760):
            france = ""
        rows.append(("France", year, france))
        rows.append(("Elsewhere", year, round(900 * math.exp(0.0015 * (year - 1700)))))
    return rows


def main():
    rng = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    plays = [make_play(i, y, rng) for i, y in enumerate(play_years(rng))]
    with open(OUT / "corpus.jsonl", "w", encoding="utf-8") as f:
        for p in plays:
            f.write(json.dumps(p, ensure_ascii=False) + "\n")
    with open(OUT / "external_series.csv", "w", encoding="utf-8") as f:
        f.write("country,year,gdppc\n")
        for country, year, value in gdp_rows():
            f.write(f"{country},{year},{value}\n")


if __name__ == "__main__":
    main()
