def add(a, b):
    """Sum two numbers."""
    return a + b


def mul(a, b):
    result = 0
    for _ in range(b):
        result = add(result, a)
    return result
