n = int(input())
print("odd" if n & 1 else "even")
