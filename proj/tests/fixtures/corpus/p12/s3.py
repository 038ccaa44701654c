s = input()
i = 0
while i < len(s) and s[i] == s[0]:
    i += 1
print(i)
