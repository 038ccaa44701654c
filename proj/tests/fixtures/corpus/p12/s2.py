import sys

data = sys.stdin.read().split("\n")
print(data[0].upper())
