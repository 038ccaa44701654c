xs = sorted(int(t) for t in input().split())
print(" ".join(map(str, xs)))
