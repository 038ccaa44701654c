xs = [int(t) for t in input().split() if t]
print(max(xs))
