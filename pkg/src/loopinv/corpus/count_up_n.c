// count to a symbolic bound with an assumed-nonnegative limit
int x;
int n;
assume(n >= 0);
x = 0;
while (x < n) {
  x = x + 1;
}
assert(x == n);
