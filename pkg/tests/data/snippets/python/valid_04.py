import json
data = {"a": [1, 2, 3], "b": None}
print(json.dumps(data, sort_keys=True))
