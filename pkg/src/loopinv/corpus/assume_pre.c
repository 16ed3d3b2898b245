// explicit precondition, no prefix code
int x;
int n;
assume(x == 0 && n == 3);
while (x < n) {
  x = x + 1;
}
assert(x == 3);
