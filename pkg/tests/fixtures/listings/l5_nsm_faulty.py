response = openai.chat.completions.create(
  model="gpt-4o-2024-11-20",
  messages=[{"role": "user", "content": "Explain recursion with an example"}])
