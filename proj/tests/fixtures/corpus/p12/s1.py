s = input()
counts = {}
for ch in s:
    counts[ch] = counts.get(ch, 0) + 1
try:
    print(max(counts, key=lambda k: (counts[k], k)))
except ValueError:
    print("none")
