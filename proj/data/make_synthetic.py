"""Generates the bundled synthetic topic corpus (deterministic)."""
import csv
import random

rng = random.Random(7)

TOPICS = {
    "pol": (["The senate", "The minister", "Parliament", "The governor", "The opposition party", "Voters"],
            ["debated", "rejected", "approved", "criticised", "amended", "campaigned on"],
            ["the election bill", "a new tax reform", "the coalition agreement", "the budget vote",
             "immigration policy", "the referendum"]),
    "spo": (["The striker", "The home team", "The coach", "The goalkeeper", "The champion", "The relay squad"],
            ["won", "lost", "dominated", "trained for", "celebrated", "qualified for"],
            ["the league final", "the derby match", "the world cup", "a marathon race",
             "the tennis tournament", "the playoff series"]),
    "sci": (["The laboratory", "Astronomers", "The research team", "Biologists", "The physicist", "Chemists"],
            ["discovered", "measured", "published", "simulated", "observed", "sequenced"],
            ["a distant galaxy", "the protein structure", "quantum entanglement", "a new enzyme",
             "the genome", "dark matter signals"]),
}
WHEN = ["on Monday", "this week", "last night", "after months of work", "in a surprise move", "yesterday"]

rows = []
seen = set()
for code, (subj, verb, obj) in TOPICS.items():
    made = 0
    while made < 40:
        title = f"{rng.choice(subj)} {rng.choice(verb)} {rng.choice(obj)}"
        body = f"Reports say it happened {rng.choice(WHEN)}."
        if (title, body) in seen:
            continue
        seen.add((title, body))
        rows.append([title, body, code])
        made += 1
rng.shuffle(rows)
# exact duplicates, NA rows and a label that the ingest spec drops
rows.insert(5, list(rows[3]))
rows.insert(17, list(rows[11]))
rows.insert(30, ["", "NA", "pol"])
rows.insert(41, ["Weather update", "Rain expected tomorrow.", "other"])
rows.insert(55, ["The coach praised the team", "Great spirit.", ""])

with open("synthetic_topics.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["id", "title", "body", "topic"])
    for i, r in enumerate(rows):
        w.writerow([i] + r)
