"""Regenerate the committed Titanic fixture model.

Not part of the package: needs xgboost and pandas, which the library itself
never imports. Run once; the outputs are committed under
src/shapnarr/fixtures/.

    python scripts/train_titanic_fixture.py path/to/titanic.csv

The input is the 1309-row Titanic CSV with lower-case column names
(pclass, survived, sex, age, sibsp, parch, fare, embarked), as shipped
e.g. inside the ``dabl`` wheel (dabl/datasets/titanic.csv).
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import xgboost as xgb

FEATURES = ["Pclass", "Sex", "Age", "SibSp", "Parch", "Fare", "Embarked"]
OUT = Path(__file__).resolve().parents[1] / "src" / "shapnarr" / "fixtures"


def encode(raw: pd.DataFrame) -> pd.DataFrame:
    df = pd.DataFrame(
        {
            "Pclass": raw["pclass"].astype(float),
            "Sex": raw["sex"].map({"female": 0.0, "male": 1.0}),
            "Age": pd.to_numeric(raw["age"], errors="coerce"),
            "SibSp": raw["sibsp"].astype(float),
            "Parch": raw["parch"].astype(float),
            "Fare": pd.to_numeric(raw["fare"], errors="coerce"),
            "Embarked": raw["embarked"].map({"C": 0.0, "Q": 1.0, "S": 2.0}),
        }
    )
    return df[FEATURES]


def main(path: str) -> None:
    raw = pd.read_csv(path, na_values=["?"])
    X = encode(raw)
    y = raw["survived"].astype(int).to_numpy()

    dtrain = xgb.DMatrix(X, label=y, feature_names=FEATURES, missing=np.nan)
    params = {
        "objective": "binary:logistic",
        "max_depth": 3,
        "eta": 0.1,
        "seed": 0,
        "tree_method": "exact",
    }
    booster = xgb.train(params, dtrain, num_boost_round=60)

    config = json.loads(booster.save_config())
    base_prob = float(config["learner"]["learner_model_param"]["base_score"].strip("[]"))
    base_margin = math.log(base_prob / (1.0 - base_prob))

    dump = [json.loads(t) for t in booster.get_dump(dump_format="json")]
    (OUT / "titanic_model.json").write_text(json.dumps(dump, indent=1) + "\n")
    meta = {
        "base_score": base_margin,
        "feature_names": FEATURES,
        "objective": "binary_logistic",
        "labels": ["did not survive", "survived"],
    }
    (OUT / "titanic_meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    # cross-check against the reference implementation
    sys.path.insert(0, str(OUT.parents[1]))
    from shapnarr.model import load_model_files, predict_margin

    model = load_model_files(OUT / "titanic_model.json", OUT / "titanic_meta.json")
    ref = booster.predict(dtrain, output_margin=True)
    ours = np.array(
        [predict_margin(model, [None if np.isnan(v) else float(v) for v in row]) for row in X.to_numpy()]
    )
    print("trees:", len(dump), "base margin:", base_margin)
    print("max |margin diff| vs xgboost:", float(np.max(np.abs(ours - ref))))


if __name__ == "__main__":
    main(sys.argv[1])
