line = input()
# echo the first line back
print(line)
