"""
Partial-token scenario datasets
===============================

Five cut procedures turn each corpus document into a prompt that ends
in a deliberately awkward spot, plus a baseline prompt backtracked to
the last full word (the control where no partial token is present).
"""

from tokalign import SCENARIOS, fixtures, generate_dataset, validate_example

corpus = fixtures.build_code_corpus()

for scenario in SCENARIOS:
    examples, stats = generate_dataset(corpus, scenario, seed=7, per_doc=1)
    bad = sum(1 for ex in examples if validate_example(ex))
    ex = examples[0]
    print(f"--- {scenario}: {stats['emitted']} examples "
          f"({stats['skipped']} docs skipped, {bad} invalid)")
    print(f"    prompt ends:   {ex.prompt[-28:]!r}")
    print(f"    baseline ends: {ex.baseline_prompt[-28:]!r}")
    print(f"    truth starts:  {ex.ground_truth[:18]!r}")
