// nondeterministic bonus, bounded by the iteration counter
int i;
int total;
i = 0;
total = 0;
while (i < 5) {
  if (unknown()) {
    total = total + 1;
  }
  i = i + 1;
}
assert(total <= 5 && 0 <= total);
