"""
From deficits to recommendations
================================

Each deficit above its threshold becomes a risk (weight x |deficit|).
Meal, BMI and interaction rules add their own risks. Risks below 0.5 are
dropped, the two largest are shown, and a total above 3 marks the advice
as high priority.
"""

import datetime as dt

from rimsim import features, recommender, synthgen
from rimsim.recommender import RecommenderConfig

cfg = RecommenderConfig()

# A short night, little walking and no breakfast.
day = synthgen.DailyRecord(date=dt.date(2025, 4, 18), steps=3000, distance=2.0,
                           sleep=5.0, breakfast=0, lunch=1, dinner=1, age=22,
                           height=165.0, weight=59.0, gender=0)
x = features.engineer(day)
d = features.deficit_labels(day)
print("deficits (sleep h, distance km):", d)

items = recommender.param_risks(d, cfg) + recommender.rule_risks(x, d, cfg)
for item in sorted(items, key=lambda i: -i.risk):
    print(f"  {item.source:28s} {item.risk:.2f}")
rec = recommender.recommend(x, d, cfg)
print(f"composite risk {rec.score:.2f}")
print(rec.render())

# Everything inside the ideal ranges: the fallback message.
ok = synthgen.DailyRecord(date=dt.date(2025, 4, 19), steps=10000, distance=6.0,
                          sleep=8.0, breakfast=1, lunch=1, dinner=1, age=22,
                          height=165.0, weight=59.0, gender=0)
print(recommender.recommend(features.engineer(ok), features.deficit_labels(ok), cfg).render())
