total = 0
for tok in input().split():
    total += int(tok)
print(total)
