"""
Generating a synthetic lifestyle dataset
========================================

Each simulated user gets a fixed profile (age, gender, height, weight,
stride) and one record per day. Every user draws from its own random
stream, so adding users never changes the existing ones.
"""

import numpy as np

from rimsim import features, synthgen

data = synthgen.generate_dataset(n_users=200, days_per_user=15, seed=42)
records = synthgen.flatten(data)
print(f"{len(records)} records from {len(data)} users")
print(synthgen.to_csv(records[:3]))

# Distance is steps times a per-user stride, so the two are almost
# perfectly correlated; only distance is kept as a model input.
steps = np.array([r.steps for r in records], dtype=float)
dist = np.array([r.distance for r in records])
print("Pearson r(steps, distance) =", round(np.corrcoef(steps, dist)[0, 1], 4))

# Seven model inputs per day, and the two deficit targets: how far sleep
# and distance fall short of (positive) or exceed (negative) their ideal ranges.
x = features.engineer_many(records)
y = features.labels_many(records)
print("features:", features.FEATURES)
print("first row:", np.round(x[0], 2), "-> deficits", y[0])
print(f"share of exactly-zero deficits: {(y == 0).mean():.1%}")

# The first 8 days of the fourth user: the same profile on every row.
for r in data[3][:8]:
    print(r.date, r.steps, f"{r.distance:.2f} km", f"{r.sleep:.2f} h", r.breakfast, r.lunch + r.dinner)
