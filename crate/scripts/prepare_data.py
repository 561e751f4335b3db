"""Convert the raw Adult, COMPAS and German Credit files into the CSV layout
used by the fairtree tests and CLI examples.

Usage: python3 scripts/prepare_data.py <raw-dir> <out-dir>

<raw-dir> must contain adult/adult.data, adult/adult.test,
compas/compas-scores-two-years.csv and german/german.data (the layout of the
`responsibly` wheel's dataset directory).
"""
import csv
import os
import sys

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "educational_num",
    "marital_status", "occupation", "relationship", "race", "gender",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings_status", "employment", "installment_commitment",
    "personal_status", "other_parties", "residence_since",
    "property_magnitude", "age", "other_payment_plans", "housing",
    "existing_credits", "job", "num_dependents", "own_telephone",
    "foreign_worker", "credit",
]

COMPAS_FEATURES = [
    "sex", "age", "age_cat", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree",
]


def adult(raw, out):
    rows = []
    for name in ("adult.data", "adult.test"):
        with open(os.path.join(raw, "adult", name)) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("|"):
                    continue
                fields = [x.strip() for x in line.split(",")]
                if len(fields) != len(ADULT_COLUMNS) or "?" in fields:
                    continue
                fields[-1] = fields[-1].rstrip(".")
                rows.append(fields)
    write(out, "adult.csv", ADULT_COLUMNS, rows)


def german(raw, out):
    rows = []
    with open(os.path.join(raw, "german", "german.data")) as f:
        for line in f:
            fields = line.split()
            if not fields:
                continue
            fields[12] = ">25" if int(fields[12]) > 25 else "<=25"
            fields[20] = "good" if fields[20] == "1" else "bad"
            rows.append(fields)
    write(out, "german.csv", GERMAN_COLUMNS, rows)


def compas(raw, out):
    rows = []
    with open(os.path.join(raw, "compas", "compas-scores-two-years.csv")) as f:
        for r in csv.DictReader(f):
            # ProPublica's screening filter.
            if r["days_b_screening_arrest"] == "":
                continue
            days = int(r["days_b_screening_arrest"])
            if days > 30 or days < -30 or r["is_recid"] == "-1":
                continue
            if r["c_charge_degree"] == "O" or r["score_text"] == "N/A":
                continue
            if r["c_charge_desc"] == "":
                continue
            race = "Caucasian" if r["race"] == "Caucasian" else "non-Caucasian"
            label = "no" if r["two_year_recid"] == "0" else "yes"
            rows.append([r[c] for c in COMPAS_FEATURES] + [race, label])
    write(out, "compas.csv", COMPAS_FEATURES + ["race", "two_year_recid"], rows)


def write(out, name, header, rows):
    with open(os.path.join(out, name), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{name}: {len(rows)} rows")


if __name__ == "__main__":
    raw_dir, out_dir = sys.argv[1], sys.argv[2]
    adult(raw_dir, out_dir)
    german(raw_dir, out_dir)
    compas(raw_dir, out_dir)
