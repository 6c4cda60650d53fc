/** Small DOM helpers; every interactive element gets an accessible label. */

export function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function button(
  doc: Document,
  label: string,
  onActivate: () => void,
  className = "btn",
): HTMLButtonElement {
  const node = doc.createElement("button");
  node.type = "button";
  node.className = className;
  node.textContent = label;
  node.setAttribute("aria-label", label);
  node.addEventListener("click", (event) => {
    event.preventDefault();
    onActivate();
  });
  return node;
}
