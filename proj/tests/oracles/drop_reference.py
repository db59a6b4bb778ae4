"""Reference token-F1 evaluator with number matching (DROP style).

Written directly against the published DROP evaluation procedure using
numpy and scipy. Used only to produce the frozen fixture that the C++
implementation is checked against:

    python3 drop_reference.py > ../data/numeracy_f1_fixture.json
"""

import json
import re
import string
import sys

import numpy as np
from scipy.optimize import linear_sum_assignment

EXCLUDE = set(string.punctuation)


def is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def remove_articles(text):
    return re.sub(r"\b(a|an|the)\b", " ", text, flags=re.UNICODE)


def white_space_fix(text):
    return " ".join(text.split())


def remove_punc(text):
    if is_number(text):
        return text
    return "".join(ch for ch in text if ch not in EXCLUDE)


def normalize_number(text):
    return str(float(text)) if is_number(text) else text


def normalize_answer(text):
    parts = [
        white_space_fix(remove_articles(normalize_number(remove_punc(token.lower()))))
        for token in re.split(" |-", text)
    ]
    parts = [p for p in parts if p.strip()]
    return " ".join(parts).strip()


def answer_to_bags(answer):
    spans = answer if isinstance(answer, (list, tuple)) else [answer]
    normalized = [normalize_answer(s) for s in spans]
    return normalized, [set(n.split()) for n in normalized]


def compute_f1(predicted_bag, gold_bag):
    intersection = len(gold_bag.intersection(predicted_bag))
    precision = 1.0 if not predicted_bag else intersection / float(len(predicted_bag))
    recall = 1.0 if not gold_bag else intersection / float(len(gold_bag))
    if precision == 0.0 and recall == 0.0:
        return 0.0
    return (2 * precision * recall) / (precision + recall)


def match_numbers_if_present(gold_bag, predicted_bag):
    gold_numbers = {w for w in gold_bag if is_number(w)}
    predicted_numbers = {w for w in predicted_bag if is_number(w)}
    return (not gold_numbers) or bool(gold_numbers & predicted_numbers)


def align_bags(predicted, gold):
    scores = np.zeros([len(gold), len(predicted)])
    for g, gold_item in enumerate(gold):
        for p, pred_item in enumerate(predicted):
            if match_numbers_if_present(gold_item, pred_item):
                scores[g, p] = compute_f1(pred_item, gold_item)
    rows, cols = linear_sum_assignment(-scores)
    best = np.zeros([max(len(gold), len(predicted))])
    for r, c in zip(rows, cols):
        best[r] = max(best[r], scores[r, c])
    return best


def get_metrics(predicted, gold):
    pred_spans, pred_bags = answer_to_bags(predicted)
    gold_spans, gold_bags = answer_to_bags(gold)
    em = 1.0 if set(pred_spans) == set(gold_spans) and len(pred_spans) == len(gold_spans) else 0.0
    f1 = round(float(np.mean(align_bags(pred_bags, gold_bags))), 2)
    return em, f1


PAIRS = [
    (["Lease and loan receivables"], ["loan receivables"]),
    (["2"], ["2"]),
    (["2"], ["3"]),
    (["0.7854"], ["0.7854"]),
    (["2.0033"], ["2"]),
    (["148,502"], ["$148,502"]),
    (["$148,502"], ["148502"]),
    (["-0.1619"], ["-0.1619"]),
    (["-0.1619"], ["0.1619"]),
    (["5593"], ["5,593"]),
    (["5593 thousand"], ["5593"]),
    (["7.18%"], ["7.18"]),
    (["the Americas"], ["Americas"]),
    (["An apple a day"], ["apple day"]),
    (["Americas", "EMEA"], ["EMEA", "Americas"]),
    (["Americas", "EMEA", "Asia Pacific"], ["Americas", "EMEA"]),
    (["Americas"], ["Americas", "EMEA", "Asia Pacific"]),
    (["Asia Pacific", "EMEA"], ["Asia-Pacific", "EMEA"]),
    (["2019", "2018"], ["2018", "2019"]),
    (["2019"], ["2018", "2019"]),
    (["year ended 2019"], ["2019"]),
    (["2019 revenue"], ["2018 revenue"]),
    (["revenue"], ["2019 revenue"]),
    (["Which year are you asking about?"], ["Which period are you asking about?"]),
    (["Which period are you asking about?"], ["which period are you asking about"]),
    (["What kind of receivables are you asking about?"], ["Which portfolio segment are you asking about?"]),
    (["1e5"], ["100000"]),
    (["1_000"], ["1000"]),
    (["0.00001"], ["1e-05"]),
    (["10000000000000000"], ["1e16"]),
    (["1234567890123456"], ["1234567890123456.0"]),
    (["nan"], ["NaN"]),
    (["Infinity"], ["inf"]),
    ([""], ["loan receivables"]),
    ([""], ["2"]),
    (["a"], ["the"]),
    (["3.0"], ["3"]),
    (["03"], ["3"]),
    (["(88-105)/105"], ["-0.1619"]),
    (["net income (loss)"], ["net income"]),
    (["U.S. and Canada"], ["US and Canada"]),
    (["cash and cash equivalents, net"], ["cash and cash equivalents"]),
    (["one two three four five six seven"], ["one two three"]),
    (["1", "2", "3", "4", "5", "6", "7", "8", "9"], ["1", "2", "3", "4", "5", "6", "7", "8", "10"]),
    (["alpha beta", "gamma"], ["alpha", "beta gamma"]),
    (["12.5 million"], ["12.5"]),
    (["Q1\tQ2"], ["Q1 Q2"]),
    (["plan-based awards"], ["plan based awards"]),
    (["x y z"], ["x y z w v u t s"]),
    (["0.30"], ["0.3"]),
]


def main():
    rows = []
    for pred, gold in PAIRS:
        em, f1 = get_metrics(pred, gold)
        rows.append({
            "pred": pred,
            "gold": gold,
            "pred_normalized": [normalize_answer(s) for s in pred],
            "em": em,
            "f1": f1,
        })
    json.dump(rows, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
